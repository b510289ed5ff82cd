//! Flexible layer-wise N:M sparsity planning for weight tensors, plus
//! bit-true functional and analytic performance models of a partitioned
//! digital compute-in-memory macro executing the resulting sparse GEMMs.
//!
//! Pipeline: load a model ([`store`]), score and locate outliers
//! ([`analysis`]), pick per-layer N:M patterns ([`planner`]), apply and
//! encode them ([`pruner`]), then estimate latency/energy against baseline
//! architectures ([`sim`]).

pub mod analysis;
pub mod error;
pub mod matrix;
pub mod pattern;
pub mod planner;
pub mod pruner;
pub mod scalar;
pub mod sim;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use pattern::PatternChoice;
pub use scalar::Real;

// Concrete scalar bindings. Analysis math is generic over `Real`; payloads
// are f32 on disk, the simulator runs int8 operands with int32 accumulators.
pub type WeightMatrix = Matrix<f32>;
pub type Mask = Matrix<bool>;
pub type QuantMatrix = Matrix<i8>;
pub type AccumMatrix = Matrix<i32>;
pub type F32Tensor = store::WeightTensor<f32>;
pub type F64Tensor = store::WeightTensor<f64>;
