//! Fitted models of any method, persisted in one container format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::group_ocsvm::GroupOcsvmModel;
use crate::baselines::mgm::{mgm_score, MgmModel};
use crate::baselines::ocsmm::OcsmmModel;
use crate::dataset::{Group, GroupDataset, ScoreTable};
use crate::dgm::{score_many, DgmModel, GroupReference};
use crate::error::{GadError, Result};
use crate::numerics::{Tensor, TensorContainer};

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    /// A DGM with the references built from its training groups.
    Dgm(DgmModel, Vec<GroupReference>),
    Mgm(MgmModel),
    Ocsmm(OcsmmModel),
    Ocsvm(GroupOcsvmModel),
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    method: String,
    inner: String,
    references: Vec<Vec<f64>>,
}

impl FittedModel {
    pub fn method(&self) -> &'static str {
        match self {
            FittedModel::Dgm(m, _) => match m.config.kind {
                crate::dgm::DgmKind::Vae => "vae",
                crate::dgm::DgmKind::Aae => "aae",
            },
            FittedModel::Mgm(_) => "mgm",
            FittedModel::Ocsmm(_) => "ocsmm",
            FittedModel::Ocsvm(_) => "ocsvm",
        }
    }

    /// Scores groups not seen during fitting.
    pub fn score(&self, ds: &GroupDataset) -> Result<ScoreTable> {
        match self {
            FittedModel::Dgm(_, refs) => score_many(refs, ds),
            FittedModel::Mgm(m) => mgm_score(m, ds),
            FittedModel::Ocsmm(m) => m.score(ds),
            FittedModel::Ocsvm(m) => m.score(ds),
        }
    }

    pub fn to_container(&self) -> Result<TensorContainer> {
        let (inner, references) = match self {
            FittedModel::Dgm(m, refs) => {
                let mut c = m.to_container()?;
                for (i, r) in refs.iter().enumerate() {
                    c.push(
                        format!("reference/{i}"),
                        Tensor::new(r.group.n_points(), r.group.dim(), r.group.data().to_vec())?,
                    );
                }
                (c, refs.iter().map(|r| r.z.clone()).collect())
            }
            FittedModel::Mgm(m) => (m.to_container()?, Vec::new()),
            FittedModel::Ocsmm(m) => (m.to_container()?, Vec::new()),
            FittedModel::Ocsvm(m) => (m.to_container()?, Vec::new()),
        };
        let env = Envelope {
            method: self.method().into(),
            inner: inner.metadata,
            references,
        };
        let json = serde_json::to_string(&env).map_err(|e| GadError::Serde(e.to_string()))?;
        Ok(TensorContainer {
            metadata: json,
            tensors: inner.tensors,
        })
    }

    pub fn from_container(c: &TensorContainer) -> Result<Self> {
        let env: Envelope = serde_json::from_str(&c.metadata).map_err(|e| GadError::Serde(e.to_string()))?;
        let inner = TensorContainer {
            metadata: env.inner,
            tensors: c.tensors.clone(),
        };
        match env.method.as_str() {
            "vae" | "aae" => {
                let model = DgmModel::from_container(&inner)?;
                let mut refs = Vec::with_capacity(env.references.len());
                for (i, z) in env.references.into_iter().enumerate() {
                    let t = c.require(&format!("reference/{i}"))?;
                    refs.push(GroupReference {
                        group: Group::new(t.rows(), t.cols(), t.data().to_vec())?,
                        z,
                    });
                }
                Ok(FittedModel::Dgm(model, refs))
            }
            "mgm" => Ok(FittedModel::Mgm(MgmModel::from_container(&inner)?)),
            "ocsmm" => Ok(FittedModel::Ocsmm(OcsmmModel::from_container(&inner)?)),
            "ocsvm" => Ok(FittedModel::Ocsvm(GroupOcsvmModel::from_container(&inner)?)),
            other => Err(GadError::Serde(format!("unknown model kind {other}"))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container()?.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(&TensorContainer::load(path)?)
    }
}
