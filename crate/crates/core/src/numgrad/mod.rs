//! Dense tensors, reverse-mode differentiation, Adam, and finite-difference checks.

mod adam;
mod gradcheck;
mod named;
mod scalar;
mod tape;
mod tensor;

pub use adam::{adam_step, OptimizerState};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use named::NamedTensors;
pub use scalar::Scalar;
pub use tape::{softmax_xent, Activation, Adjoints, Tape, Var, LOG_CLAMP};
pub use tensor::Tensor;

/// Parameter gradients keyed like the parameters they differentiate.
pub type Gradients<S> = NamedTensors<S>;

#[cfg(test)]
mod tests;
