//! Nightly sepsis-onset prediction on synthetic ICU cohorts: a small
//! reverse-mode autodiff engine, a bidirectional GRU model with a static
//! branch, instance-discrimination pretraining, constrained fine-tuning,
//! cross-validated evaluation and executable representation-preservation checks.
//!
//! `numgrad` and `model` are generic over the scalar type; everything from
//! `train` onward runs in `f64`. The aliases below name the `f64` instances.

pub mod cohort;
pub mod error;
pub mod eval;
pub mod model;
pub mod numgrad;
pub mod pipeline;
pub mod rng;
pub mod theory;
pub mod train;

pub use error::{Error, Result};

pub type Tensor = numgrad::Tensor<f64>;
pub type Gradients = numgrad::Gradients<f64>;
pub type ParamSet = model::ParamSet<f64>;
pub type OptimizerState = numgrad::OptimizerState<f64>;
/// Single-precision variants for callers that trade accuracy for memory.
pub type TensorF32 = numgrad::Tensor<f32>;
pub type ParamSetF32 = model::ParamSet<f32>;
