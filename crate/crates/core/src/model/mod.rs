//! The non-causal Wavenet: configuration and field arithmetic, the network
//! itself, and full-track separation.

mod config;
mod network;
mod separate;

pub use config::{ModelConfig, WIDE_KERNEL};
pub use network::{kernel_shapes, Model};
pub use separate::{complete_sources, SourceEstimates};
