//! Experiment configuration files (TOML or JSON).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::group_ocsvm::GroupOcsvmConfig;
use crate::baselines::mgm::MgmConfig;
use crate::baselines::ocsmm::OcsmmConfig;
use crate::dgm::{DgmKind, TrainConfig};
use crate::error::{GadError, Result};
use crate::io::FileFormat;
use crate::synthetic::SyntheticConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic(SyntheticConfig),
    File {
        path: PathBuf,
        #[serde(default)]
        format: Option<FileFormat>,
        /// Unseen groups to score with the model fitted on `path`.
        #[serde(default)]
        score_path: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodConfig {
    Vae(TrainConfig),
    Aae(TrainConfig),
    Mgm(MgmConfig),
    Ocsmm(OcsmmConfig),
    Ocsvm(GroupOcsvmConfig),
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Vae(_) => "vae",
            MethodConfig::Aae(_) => "aae",
            MethodConfig::Mgm(_) => "mgm",
            MethodConfig::Ocsmm(_) => "ocsmm",
            MethodConfig::Ocsvm(_) => "ocsvm",
        }
    }

    /// Copies the experiment seed into the method and pins the DGM kind to the variant.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut m = self.clone();
        match &mut m {
            MethodConfig::Vae(c) => {
                c.seed = seed;
                c.kind = DgmKind::Vae;
            }
            MethodConfig::Aae(c) => {
                c.seed = seed;
                c.kind = DgmKind::Aae;
            }
            MethodConfig::Mgm(c) => c.seed = seed,
            MethodConfig::Ocsmm(c) => c.seed = seed,
            MethodConfig::Ocsvm(c) => c.seed = seed,
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Label used for suite columns; defaults to a description of the dataset.
    #[serde(default)]
    pub name: Option<String>,
    pub dataset: DatasetSource,
    pub method: MethodConfig,
    /// Drives data generation, shuffling and every method seed.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Write the kernel Gram matrix as `gram.csv` for kernel methods.
    #[serde(default)]
    pub dump_gram: bool,
}

impl ExperimentConfig {
    pub fn from_str_with_format(text: &str, json: bool) -> Result<Self> {
        let cfg: Self = if json {
            serde_json::from_str(text).map_err(|e| GadError::InvalidConfig(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| GadError::InvalidConfig(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GadError::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::from_str_with_format(&text, json)
    }

    pub fn validate(&self) -> Result<()> {
        if let DatasetSource::Synthetic(s) = &self.dataset {
            s.validate()?;
        }
        match &self.method {
            MethodConfig::Vae(c) | MethodConfig::Aae(c) => c.validate(),
            MethodConfig::Mgm(c) => {
                if c.n_types == 0 || c.n_components == 0 || c.max_iter == 0 || c.restarts == 0 {
                    Err(GadError::InvalidConfig("mgm counts must be >= 1".into()))
                } else {
                    Ok(())
                }
            }
            MethodConfig::Ocsmm(c) => check_nu(c.nu),
            MethodConfig::Ocsvm(c) => {
                if c.k == 0 {
                    return Err(GadError::InvalidConfig("ocsvm k must be >= 1".into()));
                }
                check_nu(c.nu)
            }
        }
    }

    pub fn label(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        match &self.dataset {
            DatasetSource::Synthetic(s) => format!("synthetic_m{}", s.n_groups()),
            DatasetSource::File { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "file".into()),
        }
    }
}

fn check_nu(nu: Option<f64>) -> Result<()> {
    match nu {
        Some(v) if !(v > 0.0 && v <= 1.0) => Err(GadError::InvalidConfig(format!("nu = {v} outside (0, 1]"))),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_toml_and_json() {
        let toml_text = r#"
            seed = 3
            [dataset.synthetic]
            n_regular = 10
            n_anomalous = 2
            points_per_group = 8
            [method]
            kind = "mgm"
            n_types = 1
            n_components = 3
        "#;
        let cfg = ExperimentConfig::from_str_with_format(toml_text, false).unwrap();
        assert_eq!(cfg.method.name(), "mgm");
        assert_eq!(cfg.label(), "synthetic_m12");
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_str_with_format(&json, true).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad_nu = r#"
            [dataset.file]
            path = "x.csv"
            [method]
            kind = "ocsmm"
            nu = 1.5
        "#;
        assert!(matches!(
            ExperimentConfig::from_str_with_format(bad_nu, false),
            Err(GadError::InvalidConfig(_))
        ));
        let unknown = r#"
            [dataset.file]
            path = "x.csv"
            [method]
            kind = "mgm"
            bogus = 1
        "#;
        assert!(ExperimentConfig::from_str_with_format(unknown, false).is_err());
        let zero_epochs = r#"
            [dataset.file]
            path = "x.csv"
            [method]
            kind = "vae"
            epochs = 0
        "#;
        assert!(ExperimentConfig::from_str_with_format(zero_epochs, false).is_err());
    }
}
