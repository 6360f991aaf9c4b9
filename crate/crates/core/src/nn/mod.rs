//! Deterministic numeric core: valid dilated 1-D convolutions, gated
//! activations, a reverse-mode tape, ADAM, and a finite-difference checker.

mod activation;
mod adam;
mod conv;
mod gradcheck;
mod tape;
mod tensor;

pub use activation::{gated_unit, gated_unit_backward, relu, relu_backward};
pub use adam::{AdamConfig, AdamState};
pub use conv::{conv1d, conv1d_backward, ConvParams};
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use tape::{NodeId, Tape};
pub use tensor::{FeatureMap, Real};
