//! Pointwise ν-one-class SVM applied to groups through a fixed-length feature map.

use serde::{Deserialize, Serialize};

use super::kernel::{median_sq_distance, rbf_cross_gram, rbf_gram, KernelSpec};
use super::kmeans::{bag_of_features, kmeans, pooled_points, Codebook};
use super::ocsmm::DEFAULT_MAX_PAIRS;
use super::ocsvm::{ocsvm_fit, ocsvm_score, KernelFit, SvmSolution};
use crate::dataset::{flatten_group, GroupDataset, ScoreTable};
use crate::error::{GadError, Result};
use crate::numerics::{Tensor, TensorContainer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupFeatures {
    /// Nearest-centroid histogram over a k-means codebook.
    BagOfFeatures,
    /// The whole group matrix as one long vector.
    Flatten,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupOcsvmConfig {
    /// Anomaly proportion; callers with labels default it to the true one.
    pub nu: Option<f64>,
    pub features: GroupFeatures,
    pub k: usize,
    pub kmeans_iter: usize,
    /// Pooled observations used to fit the codebook.
    pub kmeans_points: usize,
    pub bandwidth: Option<f64>,
    pub max_pairs: usize,
    pub seed: u64,
}

impl Default for GroupOcsvmConfig {
    fn default() -> Self {
        Self {
            nu: None,
            features: GroupFeatures::BagOfFeatures,
            k: 40,
            kmeans_iter: 100,
            kmeans_points: 100_000,
            bandwidth: None,
            max_pairs: DEFAULT_MAX_PAIRS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupOcsvmModel {
    pub features: GroupFeatures,
    pub codebook: Option<Codebook>,
    pub spec: KernelSpec,
    pub solution: SvmSolution,
    /// Feature rows of the training groups.
    pub train_features: Tensor,
}

fn flatten_features(ds: &GroupDataset) -> Result<Tensor> {
    let n = ds.common_group_size()?;
    let width = n * ds.dim();
    let mut data = Vec::with_capacity(ds.len() * width);
    for g in ds.groups() {
        data.extend(flatten_group(g));
    }
    Tensor::new(ds.len(), width, data)
}

/// Fits on `ds` and returns the model with the training groups' scores.
pub fn group_ocsvm_fit(ds: &GroupDataset, nu: f64, cfg: &GroupOcsvmConfig) -> Result<KernelFit<GroupOcsvmModel>> {
    ds.validate()?;
    let (codebook, features) = match cfg.features {
        GroupFeatures::BagOfFeatures => {
            let pooled = pooled_points(ds, cfg.kmeans_points, cfg.seed)?;
            let fit = kmeans(&pooled, cfg.k, cfg.kmeans_iter, cfg.seed)?;
            let feats = bag_of_features(ds, &fit.codebook)?;
            (Some(fit.codebook), feats)
        }
        GroupFeatures::Flatten => (None, flatten_features(ds)?),
    };
    let spec = match cfg.bandwidth {
        Some(bw) => KernelSpec::rbf(bw)?,
        None => KernelSpec::rbf(median_sq_distance(features.data(), features.cols(), cfg.max_pairs, cfg.seed)?)?,
    };
    let gram = rbf_gram(&features, &spec);
    let solution = ocsvm_fit(&gram, nu, cfg.seed)?;
    let scores = (0..gram.rows())
        .map(|i| ocsvm_score(&solution, gram.row(i)))
        .collect::<Result<Vec<f64>>>()?;
    let model = GroupOcsvmModel {
        features: cfg.features,
        codebook,
        spec,
        solution,
        train_features: features,
    };
    Ok(KernelFit {
        model,
        scores: ScoreTable::from_scores(scores)?,
        gram,
    })
}

impl GroupOcsvmModel {
    fn featurize(&self, ds: &GroupDataset) -> Result<Tensor> {
        match (&self.features, &self.codebook) {
            (GroupFeatures::BagOfFeatures, Some(cb)) => bag_of_features(ds, cb),
            (GroupFeatures::BagOfFeatures, None) => Err(GadError::UntrainedModel),
            (GroupFeatures::Flatten, _) => {
                let f = flatten_features(ds)?;
                if f.cols() != self.train_features.cols() {
                    return Err(GadError::DimensionMismatch {
                        expected: self.train_features.cols(),
                        found: f.cols(),
                    });
                }
                Ok(f)
            }
        }
    }

    pub fn score(&self, ds: &GroupDataset) -> Result<ScoreTable> {
        ds.validate()?;
        let feats = self.featurize(ds)?;
        let cross = rbf_cross_gram(&feats, &self.train_features, &self.spec)?;
        let scores = (0..cross.rows())
            .map(|i| ocsvm_score(&self.solution, cross.row(i)))
            .collect::<Result<Vec<f64>>>()?;
        ScoreTable::from_scores(scores)
    }

    pub fn to_container(&self) -> Result<TensorContainer> {
        let json = serde_json::to_string(self).map_err(|e| GadError::Serde(e.to_string()))?;
        Ok(TensorContainer::new(json))
    }

    pub fn from_container(c: &TensorContainer) -> Result<Self> {
        serde_json::from_str(&c.metadata).map_err(|e| GadError::Serde(e.to_string()))
    }
}
