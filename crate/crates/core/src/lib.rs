//! Waveform-domain music source separation with a non-causal Wavenet.
//!
//! The crate covers the whole pipeline: a small deterministic numeric core
//! ([`nn`]), the network and full-track separation ([`model`]), training with
//! MAE and dissimilarity losses ([`train`]), WAV and stem datasets ([`data`]),
//! and BSS Eval scoring ([`eval`]). The `wavesep` binary wraps it all ([`cli`]).

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod train;

pub use error::{Error, Result};
