//! Group anomaly detection toolkit.
//!
//! Detects anomalous *groups* of observations: deep generative models (VAE
//! and AAE) score each group by its distance from a decoded group reference;
//! classical baselines (MGM, OCSMM, OCSVM on bag-of-features) provide the
//! comparison; exact AUROC/AUPRC evaluate the ranking.

pub mod baselines;
pub mod dataset;
pub mod dgm;
pub mod error;
pub mod eval;
pub mod harness;
pub mod io;
pub mod numerics;
pub mod rng;
pub mod synthetic;

pub use dataset::{flatten_group, unflatten_group, validate_dataset, Group, GroupDataset, ScoreTable};
pub use error::{GadError, Result};
