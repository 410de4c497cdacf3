//! Config-driven experiment runner: load or generate data, fit, score, evaluate.

pub mod config;
pub mod model;
pub mod suite;

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::baselines::group_ocsvm::group_ocsvm_fit;
use crate::baselines::mgm::mgm_fit;
use crate::baselines::ocsmm::ocsmm_fit;
use crate::dataset::{GroupDataset, ScoreTable};
use crate::dgm::{group_references, train};
use crate::error::{GadError, Result};
use crate::eval::{auprc, auroc, LabeledScores};
use crate::io::{load_groups, FileFormat};
use crate::numerics::Tensor;
use crate::rng;
use crate::synthetic::generate;

pub use config::{DatasetSource, ExperimentConfig, MethodConfig};
pub use model::FittedModel;
pub use suite::{run_suite, SuiteRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Anomalous groups as the positive class.
    pub auprc: f64,
    pub auroc: f64,
    /// Average precision with regular groups as the positive class and
    /// ascending score order.
    pub auprc_regular: f64,
}

impl Metrics {
    pub fn compute(scores: &[f64], labels: &[bool]) -> Result<Self> {
        let ls = LabeledScores::new(scores, labels)?;
        Ok(Self {
            auprc: auprc(&ls)?,
            auroc: auroc(&ls)?,
            auprc_regular: auprc(&ls.inverted())?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub data: f64,
    pub fit: f64,
    pub reference: f64,
    pub score: f64,
    pub eval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: String,
    pub label: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    /// Scores in the order groups appear in the scored dataset.
    pub scores: Vec<f64>,
    pub labels: Option<Vec<bool>>,
    #[serde(flatten)]
    pub metrics: Option<Metrics>,
    pub seconds: StageTimings,
}

impl RunReport {
    /// Everything except wall-clock times.
    pub fn same_results(&self, other: &Self) -> bool {
        self.method == other.method
            && self.seed == other.seed
            && self.config == other.config
            && self.scores == other.scores
            && self.labels == other.labels
            && self.metrics == other.metrics
    }
}

/// Result of [`run_in_memory`]: the report plus artefacts to persist.
pub struct RunOutput {
    pub report: RunReport,
    pub model: FittedModel,
    pub gram: Option<Tensor>,
    pub training_curve: Option<Vec<u8>>,
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Training data and, for inductive runs, the separate dataset to score.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<(GroupDataset, Option<GroupDataset>)> {
    match &cfg.dataset {
        DatasetSource::Synthetic(s) => {
            let mut s = s.clone();
            s.seed = cfg.seed;
            Ok((generate(&s)?, None))
        }
        DatasetSource::File { path, format, score_path } => {
            let fmt = |p: &Path| format.unwrap_or_else(|| FileFormat::from_path(p));
            let train = load_groups(path, fmt(path))?;
            let unseen = match score_path {
                Some(p) => Some(load_groups(p, fmt(p))?),
                None => None,
            };
            Ok((train, unseen))
        }
    }
}

fn anomaly_fraction(labels: Option<&[bool]>, nu: Option<f64>) -> Result<f64> {
    if let Some(v) = nu {
        return Ok(v);
    }
    let labels = labels.ok_or_else(|| {
        GadError::InvalidConfig("nu must be set when the training data has no labels".into())
    })?;
    let frac = labels.iter().filter(|&&l| l).count() as f64 / labels.len() as f64;
    if frac == 0.0 {
        return Err(GadError::InvalidConfig("no labelled anomalies to default nu from; set nu".into()));
    }
    Ok(frac)
}

/// Runs one experiment without touching the filesystem (besides loading data).
pub fn run_in_memory(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let t = Instant::now();
    let (data, unseen) = load_dataset(cfg)?;
    data.validate()?;
    let mut seconds = StageTimings {
        data: secs(t),
        ..Default::default()
    };

    // fitting sees a shuffled, unlabelled copy
    let mut perm: Vec<usize> = (0..data.len()).collect();
    perm.shuffle(&mut rng::seeded(cfg.seed, rng::stream::SHUFFLE));
    let fit_ds = data.permuted(&perm)?.without_labels();
    let method = cfg.method.with_seed(cfg.seed);

    let t = Instant::now();
    let mut gram = None;
    let mut training_curve = None;
    let (model, fit_scores): (FittedModel, Option<ScoreTable>) = match &method {
        MethodConfig::Vae(c) | MethodConfig::Aae(c) => {
            let m = train(&fit_ds, c)?;
            let mut buf = Vec::new();
            m.write_history_csv(&mut buf)?;
            training_curve = Some(buf);
            seconds.fit = secs(t);
            let t = Instant::now();
            let refs = group_references(&m, &fit_ds, cfg.seed)?;
            seconds.reference = secs(t);
            (FittedModel::Dgm(m, refs), None)
        }
        MethodConfig::Mgm(c) => (FittedModel::Mgm(mgm_fit(&fit_ds, c)?), None),
        MethodConfig::Ocsmm(c) => {
            let nu = anomaly_fraction(data.labels(), c.nu)?;
            let f = ocsmm_fit(&fit_ds, nu, c)?;
            gram = Some(f.gram);
            (FittedModel::Ocsmm(f.model), Some(f.scores))
        }
        MethodConfig::Ocsvm(c) => {
            let nu = anomaly_fraction(data.labels(), c.nu)?;
            let f = group_ocsvm_fit(&fit_ds, nu, c)?;
            gram = Some(f.gram);
            (FittedModel::Ocsvm(f.model), Some(f.scores))
        }
    };
    if seconds.fit == 0.0 {
        seconds.fit = secs(t);
    }

    let t = Instant::now();
    let (scored, scores) = match &unseen {
        Some(u) => (u, model.score(u)?.scores().to_vec()),
        None => {
            let table = match fit_scores {
                Some(t) => t,
                None => model.score(&fit_ds)?,
            };
            // back to the dataset's own group order
            let mut original = vec![0.0; data.len()];
            for (pos, &g) in perm.iter().enumerate() {
                original[g] = table.score(pos);
            }
            (&data, original)
        }
    };
    seconds.score = secs(t);

    let t = Instant::now();
    let labels = scored.labels().map(<[bool]>::to_vec);
    let metrics = match &labels {
        Some(l) => Some(Metrics::compute(&scores, l)?),
        None => None,
    };
    seconds.eval = secs(t);

    let report = RunReport {
        method: method.name().into(),
        label: cfg.label(),
        seed: cfg.seed,
        config: cfg.clone(),
        scores,
        labels,
        metrics,
        seconds,
    };
    Ok(RunOutput {
        report,
        model,
        gram,
        training_curve,
    })
}

/// Runs an experiment and writes `scores.csv`, `report.json`, `model.gadt`
/// and, where applicable, `training.csv` and `gram.csv` into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    let output = run_in_memory(cfg)?;
    fs::create_dir_all(out)?;
    let table = ScoreTable::from_scores(output.report.scores.clone())?;
    write_scores_csv(&out.join("scores.csv"), &table, output.report.labels.as_deref())?;
    let json = serde_json::to_string_pretty(&output.report).map_err(|e| GadError::Serde(e.to_string()))?;
    fs::write(out.join("report.json"), json)?;
    output.model.save(&out.join("model.gadt"))?;
    if let Some(curve) = &output.training_curve {
        fs::write(out.join("training.csv"), curve)?;
    }
    if let (true, Some(g)) = (cfg.dump_gram, &output.gram) {
        write_matrix_csv(&out.join("gram.csv"), g)?;
    }
    Ok(output.report)
}

pub fn write_scores_csv(path: &Path, table: &ScoreTable, labels: Option<&[bool]>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let ranks = table.ranks();
    match labels {
        Some(_) => writeln!(w, "group_id,score,rank,label")?,
        None => writeln!(w, "group_id,score,rank")?,
    }
    for (m, &s) in table.scores().iter().enumerate() {
        match labels {
            Some(l) => writeln!(w, "{m},{s},{},{}", ranks[m], u8::from(l[m]))?,
            None => writeln!(w, "{m},{s},{}", ranks[m])?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a `scores.csv` back as `(scores, labels)`.
pub fn read_scores_csv(path: &Path) -> Result<(Vec<f64>, Option<Vec<bool>>)> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().ok_or(GadError::Parse { line: 1, msg: "empty file".into() })??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    let score_col = cols.iter().position(|c| *c == "score").ok_or(GadError::Parse {
        line: 1,
        msg: "missing score column".into(),
    })?;
    let label_col = cols.iter().position(|c| *c == "label");
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        let parse_err = |msg: String| GadError::Parse { line: i + 2, msg };
        let s: f64 = fields
            .get(score_col)
            .ok_or_else(|| parse_err("short row".into()))?
            .parse()
            .map_err(|e| parse_err(format!("{e}")))?;
        scores.push(s);
        if let Some(c) = label_col {
            labels.push(match *fields.get(c).ok_or_else(|| parse_err("short row".into()))? {
                "1" | "true" => true,
                "0" | "false" => false,
                other => return Err(parse_err(format!("bad label {other}"))),
            });
        }
    }
    Ok((scores, label_col.map(|_| labels)))
}

pub fn write_matrix_csv(path: &Path, t: &Tensor) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in 0..t.rows() {
        let row: Vec<String> = t.row(r).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Output directory: explicit argument, then the config's `out`, then `runs/<label>-<method>`.
pub fn resolve_out(cfg: &ExperimentConfig, explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{}-{}", cfg.label(), cfg.method.name())))
}
