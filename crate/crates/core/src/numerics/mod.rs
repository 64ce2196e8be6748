//! Dense tensors, reverse-mode differentiation and optimisation.

pub mod gradcheck;
pub mod graph;
pub mod linalg;
pub mod optim;
pub mod params;
pub mod tensor;

pub use graph::{Graph, Var};
pub use optim::{adam_step, AdamConfig, AdamState, LrSchedule};
pub use params::{ParamId, ParamStore};
pub use tensor::Tensor;
