//! Dense linear algebra, reverse-mode differentiation and the Adam optimizer.

pub mod container;
pub mod graph;
pub mod ops;
pub mod params;
pub mod tensor;

pub use graph::{Gradients, Graph, Var};
pub use ops::{dense, elu, reparam_sample, sigmoid};
pub use params::{adam_step, AdamConfig, ParamId, ParamSet};
pub use container::TensorContainer;
pub use tensor::Tensor;
