//! Error type shared by every stage of the toolkit.

use thiserror::Error;

/// Errors raised by data handling, model fitting, scoring and evaluation.
#[derive(Debug, Error)]
pub enum GadError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("group {index} has {n_points} points; a group needs at least 2")]
    EmptyGroup { index: usize, n_points: usize },

    #[error("non-finite value in group {group} at row {row}, column {col}")]
    NonFinite { group: usize, row: usize, col: usize },

    #[error("label count {labels} does not match group count {groups}")]
    LabelLengthMismatch { labels: usize, groups: usize },

    #[error("dataset has no groups")]
    NoGroups,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("group {group_id} carries more than one label")]
    InconsistentLabel { group_id: u64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("backward already called on this graph")]
    GraphConsumed,

    #[error("groups have unequal sizes ({first} vs {other}); the autoencoder path needs equal N_m")]
    UnequalGroupSizes { first: usize, other: usize },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    NonConvergent { epoch: usize },

    #[error("model has not been trained")]
    UntrainedModel,

    #[error("score {0} lies outside (0, 1)")]
    DomainError(f64),

    #[error("covariance of component {0} collapsed")]
    DegenerateComponent(usize),

    #[error("all observations are identical; median distance is zero")]
    DegenerateData,

    #[error("kernel matrix is not positive semi-definite")]
    NotPsd,

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("need at least {needed} points, found {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("only one class present in labels")]
    SingleClass,

    #[error("no positive labels")]
    NoPositives,

    #[error("labels are required for evaluation")]
    MissingLabels,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, GadError>;
