//! Tape-based reverse-mode autodiff over dense `f64` matrices, plus the
//! optimizer, finite-difference gradient checker, seeded noise plumbing,
//! and the on-disk checkpoint format.
//!
//! Tapes are rebuilt from scratch for every training step: event
//! neighborhoods change per target, so there is no static graph to reuse.

mod adam;
mod checkpoint;
mod gradcheck;
mod noise;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError, FORMAT_VERSION};
pub use gradcheck::{gradcheck, GradReport, ParamCheck};
pub use noise::{subseed, NoiseSource};
pub use tape::{Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

/// Errors raised by tensor and tape operations.
#[derive(Debug, Error)]
pub enum NumError {
    #[error("{op}: shape mismatch: left {lhs:?}, right {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: [usize; 2],
        rhs: [usize; 2],
    },
    #[error("{op}: invalid shape {shape:?}: {why}")]
    BadShape {
        op: &'static str,
        shape: [usize; 2],
        why: &'static str,
    },
    #[error("{op}: data length {len} does not match shape {shape:?}")]
    LengthMismatch {
        op: &'static str,
        len: usize,
        shape: [usize; 2],
    },
    #[error("{op}: empty input")]
    EmptyInput { op: &'static str },
    #[error("log domain error: input {value} is not positive")]
    LogDomain { value: f64 },
    #[error("softmax: axis {axis} out of range for a 2-d tensor")]
    BadAxis { axis: usize },
    #[error("dropout rate {rate} outside [0, 1)")]
    BadDropoutRate { rate: f64 },
    #[error("backward expects a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: [usize; 2] },
    #[error("parameter {name} has no gradient; run backward and harvest first")]
    MissingGrad { name: String },
}
