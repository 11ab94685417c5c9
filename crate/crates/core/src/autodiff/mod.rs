//! Reverse-mode automatic differentiation on a dynamic tape.
//!
//! The op set is exactly what the flow model's forward pass and the Poisson
//! objective need; everything is f64 so finite-difference checking can run at
//! tight tolerances.

mod deeplift;
mod gradcheck;
mod tape;
mod tensor;

pub use deeplift::{DeepLift, RESCALE_EPS};
pub use gradcheck::{grad_check, GradCheckReport, ParamCheck};
pub use tape::{Tape, Var};
pub use tensor::{broadcast_shape, broadcast_zip, reduce_to_shape, Tensor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("{op}: {detail}")]
    Domain { op: &'static str, detail: String },
    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
}
