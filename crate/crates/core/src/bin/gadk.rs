use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gadk::harness::{self, suite::load_suite_dir, ExperimentConfig, FittedModel, Metrics};
use gadk::io::{load_groups, save_groups, FileFormat};
use gadk::synthetic::{generate, SyntheticConfig};
use gadk::{GadError, ScoreTable};

#[derive(Parser)]
#[command(name = "gadk", version, about = "Group anomaly detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic rotated-Gaussian dataset.
    Generate {
        /// Synthetic config (TOML or JSON); defaults are used when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; `.csv` is written as csv-long, anything else as binary.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every config in a directory and write a comparison table.
    Suite {
        /// Directory of experiment configs.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutFormat,
    },
    /// Recompute metrics from a labelled scores.csv.
    Eval {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: OutFormat,
    },
    /// Score a group file with a saved model.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_synthetic(path: &Path) -> gadk::Result<SyntheticConfig> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| GadError::InvalidConfig(e.to_string()))
    } else {
        toml::from_str(&text).map_err(|e| GadError::InvalidConfig(e.to_string()))
    }
}

fn with_seed(mut cfg: ExperimentConfig, seed: Option<u64>) -> ExperimentConfig {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg
}

fn print_metrics(m: &Metrics, format: OutFormat) {
    match format {
        OutFormat::Json => println!("{}", serde_json::to_string_pretty(m).unwrap_or_default()),
        OutFormat::Csv => {
            println!("auprc,auroc,auprc_regular");
            println!("{},{},{}", m.auprc, m.auroc, m.auprc_regular);
        }
    }
}

fn execute(cli: Cli) -> gadk::Result<()> {
    match cli.command {
        Command::Generate { config, seed, out } => {
            let mut cfg = match config {
                Some(p) => read_synthetic(&p)?,
                None => SyntheticConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let ds = generate(&cfg)?;
            save_groups(&ds, &out, FileFormat::from_path(&out))?;
            eprintln!("wrote {} groups to {}", ds.len(), out.display());
        }
        Command::Run { config, seed, out } => {
            let cfg = with_seed(ExperimentConfig::load(&config)?, seed);
            let dir = harness::resolve_out(&cfg, out.as_deref());
            let report = harness::run(&cfg, &dir)?;
            eprintln!("{} on {}: results in {}", report.method, report.label, dir.display());
            if let Some(m) = report.metrics {
                print_metrics(&m, OutFormat::Json);
            }
        }
        Command::Suite { config, seed, out, format } => {
            let cfgs: Vec<ExperimentConfig> = load_suite_dir(&config)?
                .into_iter()
                .map(|c| with_seed(c, seed))
                .collect();
            let rows = harness::run_suite(&cfgs, &out, matches!(format, OutFormat::Json))?;
            eprintln!("{} methods, table in {}", rows.len(), out.display());
        }
        Command::Eval { scores, format } => {
            let (s, labels) = harness::read_scores_csv(&scores)?;
            let labels = labels.ok_or(GadError::MissingLabels)?;
            print_metrics(&Metrics::compute(&s, &labels)?, format);
        }
        Command::Score { model, data, out } => {
            let model = FittedModel::load(&model)?;
            let ds = load_groups(&data, FileFormat::from_path(&data))?;
            let table: ScoreTable = model.score(&ds)?;
            harness::write_scores_csv(&out, &table, ds.labels())?;
            if let Some(l) = ds.labels() {
                print_metrics(&Metrics::compute(table.scores(), l)?, OutFormat::Json);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                GadError::InvalidConfig(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
