//! Losses, voiced-fragment sampling, the training loop, and checkpoints.

mod checkpoint;
mod loss;
mod sampler;
mod trainer;

pub use checkpoint::{Checkpoint, EpochLosses, MAGIC, VERSION};
pub use loss::{loss_dissimilarity, loss_mae, loss_total, loss_total_with_grad, LossConfig, Reduction};
pub use sampler::{rms, sample_segment, voiced_regions, SamplerConfig, Segment, SegmentSampler};
pub use trainer::{
    best_epoch, check_loss_gradients, segment_gradients, train, validation_loss, validation_segments, TrainConfig, TrainOutcome,
};
