//! One-class support measure machine: a ν-one-class SVM on group mean embeddings.

use serde::{Deserialize, Serialize};

use super::kernel::{embedding_cross_gram, embedding_gram, median_bandwidth, subsample_indices, KernelSpec, PointSet};
use super::ocsvm::{ocsvm_fit, ocsvm_score, KernelFit, SvmSolution};
use crate::dataset::{GroupDataset, ScoreTable};
use crate::error::{GadError, Result};
use crate::numerics::{Tensor, TensorContainer};
use crate::rng;

pub const DEFAULT_MAX_PAIRS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcsmmConfig {
    /// Anomaly proportion; callers with labels default it to the true one.
    pub nu: Option<f64>,
    /// Kernel bandwidth; the median heuristic is used when absent.
    pub bandwidth: Option<f64>,
    pub max_pairs: usize,
    /// Embed each group through at most this many of its points (seeded).
    /// `None` uses every point.
    pub embedding_points: Option<usize>,
    pub seed: u64,
}

impl Default for OcsmmConfig {
    fn default() -> Self {
        Self {
            nu: None,
            bandwidth: None,
            max_pairs: DEFAULT_MAX_PAIRS,
            embedding_points: None,
            seed: 0,
        }
    }
}

/// Fitted OCSMM. Only support groups are retained for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct OcsmmModel {
    pub spec: KernelSpec,
    pub solution: SvmSolution,
    pub embedding_points: Option<usize>,
    pub seed: u64,
    support_sets: Vec<PointSet>,
}

#[derive(Serialize, Deserialize)]
struct OcsmmMeta {
    kind: String,
    bandwidth: f64,
    embedding_points: Option<usize>,
    seed: u64,
    solution: SvmSolution,
}

fn point_sets(ds: &GroupDataset, limit: Option<usize>, seed: u64, salt: u64) -> Vec<PointSet> {
    match limit {
        None => ds.groups().iter().map(PointSet::from_group).collect(),
        Some(k) => {
            let mut rng = rng::seeded(seed.wrapping_add(salt), rng::stream::EMBEDDING);
            ds.groups()
                .iter()
                .map(|g| {
                    if g.n_points() <= k {
                        PointSet::from_group(g)
                    } else {
                        PointSet::from_group_subset(g, &subsample_indices(&mut rng, g.n_points(), k))
                    }
                })
                .collect()
        }
    }
}

/// Fits on `ds` and returns the model with the training groups' scores.
pub fn ocsmm_fit(ds: &GroupDataset, nu: f64, cfg: &OcsmmConfig) -> Result<KernelFit<OcsmmModel>> {
    ds.validate()?;
    if cfg.embedding_points == Some(0) {
        return Err(GadError::InvalidConfig("embedding_points must be >= 1".into()));
    }
    let spec = match cfg.bandwidth {
        Some(bw) => KernelSpec::rbf(bw)?,
        None => KernelSpec::rbf(median_bandwidth(ds, cfg.max_pairs, cfg.seed)?)?,
    };
    let sets = point_sets(ds, cfg.embedding_points, cfg.seed, 0);
    let gram = embedding_gram(&sets, &spec)?;
    let solution = ocsvm_fit(&gram, nu, cfg.seed)?;
    let scores = (0..gram.rows())
        .map(|i| ocsvm_score(&solution, gram.row(i)))
        .collect::<Result<Vec<f64>>>()?;
    let support_sets = solution.support_indices.iter().map(|&i| sets[i].clone()).collect();
    let model = OcsmmModel {
        spec,
        solution,
        embedding_points: cfg.embedding_points,
        seed: cfg.seed,
        support_sets,
    };
    Ok(KernelFit {
        model,
        scores: ScoreTable::from_scores(scores)?,
        gram,
    })
}

/// Fits on `ds` and scores its own groups.
pub fn ocsmm_pipeline(ds: &GroupDataset, nu: f64, spec: Option<KernelSpec>) -> Result<ScoreTable> {
    let cfg = OcsmmConfig {
        bandwidth: spec.map(|s| s.bandwidth),
        ..Default::default()
    };
    Ok(ocsmm_fit(ds, nu, &cfg)?.scores)
}

impl OcsmmModel {
    /// Scores unseen groups against the retained support groups.
    pub fn score(&self, ds: &GroupDataset) -> Result<ScoreTable> {
        ds.validate()?;
        let sets = point_sets(ds, self.embedding_points, self.seed, 1);
        let cross = embedding_cross_gram(&sets, &self.support_sets, &self.spec)?;
        let alphas: Vec<f64> = self
            .solution
            .support_indices
            .iter()
            .map(|&i| self.solution.alphas[i])
            .collect();
        let scores = (0..cross.rows())
            .map(|r| {
                let k: f64 = cross.row(r).iter().zip(&alphas).map(|(k, a)| k * a).sum();
                self.solution.rho - k
            })
            .collect();
        ScoreTable::from_scores(scores)
    }

    pub fn to_container(&self) -> Result<TensorContainer> {
        let meta = OcsmmMeta {
            kind: "ocsmm".into(),
            bandwidth: self.spec.bandwidth,
            embedding_points: self.embedding_points,
            seed: self.seed,
            solution: self.solution.clone(),
        };
        let json = serde_json::to_string(&meta).map_err(|e| GadError::Serde(e.to_string()))?;
        let mut c = TensorContainer::new(json);
        for (i, set) in self.support_sets.iter().enumerate() {
            let g = set.to_group()?;
            c.push(format!("support.{i}"), Tensor::new(g.n_points(), g.dim(), g.into_data())?);
        }
        Ok(c)
    }

    pub fn from_container(c: &TensorContainer) -> Result<Self> {
        let meta: OcsmmMeta = serde_json::from_str(&c.metadata).map_err(|e| GadError::Serde(e.to_string()))?;
        if meta.kind != "ocsmm" {
            return Err(GadError::Serde(format!("expected an ocsmm model, found {}", meta.kind)));
        }
        let mut support_sets = Vec::with_capacity(meta.solution.support_indices.len());
        for i in 0..meta.solution.support_indices.len() {
            let t = c.require(&format!("support.{i}"))?;
            let g = crate::dataset::Group::new(t.rows(), t.cols(), t.data().to_vec())?;
            support_sets.push(PointSet::from_group(&g));
        }
        Ok(Self {
            spec: KernelSpec::rbf(meta.bandwidth)?,
            solution: meta.solution,
            embedding_points: meta.embedding_points,
            seed: meta.seed,
            support_sets,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Group;
    use crate::synthetic::{generate, SyntheticConfig};

    fn ds() -> GroupDataset {
        generate(&SyntheticConfig {
            n_regular: 24,
            n_anomalous: 4,
            points_per_group: 40,
            seed: 3,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn point_permutation_leaves_scores_unchanged() {
        let d = ds();
        let base = ocsmm_pipeline(&d, 4.0 / 28.0, Some(KernelSpec::rbf(0.5).unwrap())).unwrap();
        let mut groups = d.groups().to_vec();
        let g = &groups[5];
        let rows: Vec<Vec<f64>> = g.rows().rev().map(|r| r.to_vec()).collect();
        groups[5] = Group::from_rows(&rows).unwrap();
        let perm = GroupDataset::new(groups, None).unwrap();
        let other = ocsmm_pipeline(&perm, 4.0 / 28.0, Some(KernelSpec::rbf(0.5).unwrap())).unwrap();
        for (a, b) in base.scores().iter().zip(other.scores()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn inductive_scores_match_training_scores() {
        let d = ds();
        let KernelFit { model, scores: table, .. } = ocsmm_fit(&d, 0.2, &OcsmmConfig::default()).unwrap();
        let again = model.score(&d).unwrap();
        for (a, b) in table.scores().iter().zip(again.scores()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn container_round_trip() {
        let d = ds();
        let model = ocsmm_fit(&d, 0.2, &OcsmmConfig { embedding_points: Some(16), ..Default::default() }).unwrap().model;
        let back = OcsmmModel::from_container(&model.to_container().unwrap()).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.score(&d).unwrap(), model.score(&d).unwrap());
    }

    #[test]
    fn subsampled_embeddings_are_deterministic() {
        let d = ds();
        let cfg = OcsmmConfig { embedding_points: Some(10), seed: 9, ..Default::default() };
        let a = ocsmm_fit(&d, 0.2, &cfg).unwrap().scores;
        let b = ocsmm_fit(&d, 0.2, &cfg).unwrap().scores;
        assert_eq!(a, b);
    }
}
