//! Forward jets in `z` plus reverse-mode gradients over parameters.
//!
//! Input derivatives (U, U_z, U_zz) are propagated forward as [`Jet2`]
//! values; parameter gradients come from a reverse sweep over a [`Tape`]
//! whose nodes are the individual jet components.

mod arith;
mod check;
mod jet;
mod params;
mod tape;

pub use arith::{Arith, Eval};
pub use check::{
    compare_with_central_differences, directional_error, grad_check, grad_check_subset, relative_error,
    GradCheckReport,
};
pub use jet::{jet_activation, jet_affine, sigmoid, Activation, Jet2};
pub use params::{ParamStore, Segment, SPEED};
pub use tape::{Tape, TapeJet, Var};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("seed variable is not on this tape")]
    SeedNotOnTape,
    #[error("parameter slot {slot} outside gradient of length {len}")]
    SlotOutOfRange { slot: usize, len: usize },
    #[error("non-finite value at parameter index {index}")]
    NonFinite { index: usize },
    #[error("finite-difference step must be positive, got {0}")]
    BadStep(f64),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("duplicate parameter segment `{0}`")]
    DuplicateSegment(String),
    #[error("speed segment must have exactly one slot, got {0}")]
    SpeedSlot(usize),
}
