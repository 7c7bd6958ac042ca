//! Reverse-mode automatic differentiation over dense tensors.
//!
//! Only the operations the separation networks need are provided: 2-d
//! convolution, instance normalization, nearest upsampling, average pooling,
//! pointwise activations and arithmetic, and the scalar reductions used by the
//! losses.

mod adam;
pub mod conv;
pub mod gradcheck;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use tape::{Activation, Gradients, Tape, Var};
pub use tensor::Tensor;
pub use gradcheck::{check_gradients, GradCheckOptions, GradCheckReport};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: dimension mismatch: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("instance_norm needs at least 2 values per plane, got {plane}")]
    DegenerateStatistics { plane: usize },
    #[error("backward needs a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("backward has already been run on this tape; record a new one")]
    BackwardAlreadyRun,
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
}
