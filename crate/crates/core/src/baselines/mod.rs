//! Baseline group anomaly detectors.

pub mod kernel;
pub mod kmeans;
pub mod mgm;
pub mod ocsvm;
pub mod group_ocsvm;
pub mod ocsmm;
