use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, EpochLosses};
use super::loss::{loss_mae, loss_total_with_grad, LossConfig};
use super::sampler::{SamplerConfig, Segment, SegmentSampler};
use crate::data::TrackStems;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::nn::{grad_check, AdamConfig, AdamState, ConvParams, FeatureMap, GradCheckReport, Tape};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    /// Epochs without a new validation minimum before stopping.
    pub patience_epochs: usize,
    pub steps_per_epoch: usize,
    /// Hard cap on the number of epochs.
    pub max_epochs: usize,
    /// Size of the fixed validation segment set.
    pub validation_segments: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 10,
            patience_epochs: 16,
            steps_per_epoch: 1000,
            max_epochs: 500,
            validation_segments: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("patience_epochs", self.patience_epochs),
            ("steps_per_epoch", self.steps_per_epoch),
            ("max_epochs", self.max_epochs),
            ("validation_segments", self.validation_segments),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::config(format!("{name} must be at least 1")));
        }
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
        .validate()
    }
}

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters and optimizer state of the epoch with the lowest validation loss.
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub best_epoch: usize,
    pub history: Vec<EpochLosses>,
    /// Mean batch loss of every optimizer step, in order.
    pub step_losses: Vec<f64>,
    pub stopped_early: bool,
    pub sampler_fallbacks: u64,
}

/// Loss and kernel gradients for one segment.
pub fn segment_gradients(
    model: &Model<f32>,
    segment: &Segment,
    loss: &LossConfig,
) -> Result<(f64, Vec<ConvParams<f32>>)> {
    let mut tape = Tape::new();
    let input = tape.input(FeatureMap::from_waveform(segment.input.clone())?);
    let out = model.trace(&mut tape, input, model.kernels())?;
    let (value, grad) = loss_total_with_grad(tape.value(out), &segment.targets, loss)?;
    let head = tape.scalar_head(out, value, grad)?;
    let grads = tape.backward(head, model.kernels())?;
    Ok((f64::from(value), grads))
}

fn stream_seed(seed: u64, epoch: u64, step: u64, index: u64) -> u64 {
    // splitmix64 over the tuple
    let mut z = seed;
    for v in [epoch, step, index] {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(v);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Fixed validation set: uniform draws from a stream that depends only on the seed.
pub fn validation_segments(
    model: &Model<f32>,
    tracks: &[TrackStems],
    sampler: &SamplerConfig,
    count: usize,
) -> Result<Vec<Segment>> {
    let uniform = SamplerConfig {
        p_voiced: 0.0,
        ..*sampler
    };
    let s = SegmentSampler::new(uniform, model.config(), tracks)?;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(sampler.rng_seed, u64::MAX, 0, 0));
    (0..count).map(|_| s.sample(&mut rng)).collect()
}

/// Mean per-segment L_MAE over `segments`.
pub fn validation_loss(model: &Model<f32>, segments: &[Segment], loss: &LossConfig) -> Result<f64> {
    let losses: Vec<f64> = segments
        .par_iter()
        .map(|s| {
            let out = model.forward(&s.input)?;
            Ok(f64::from(loss_mae(&out, &s.targets, loss.reduction)?))
        })
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len().max(1) as f64)
}

/// Trains `model` with ADAM on segments drawn from `train_tracks`, stopping
/// once the validation loss has not improved for `patience_epochs` epochs.
pub fn train(
    mut model: Model<f32>,
    train_tracks: &[TrackStems],
    validation_tracks: &[TrackStems],
    cfg: &TrainConfig,
    loss: &LossConfig,
    sampler_cfg: &SamplerConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    loss.validate(model.config().num_outputs)?;
    if train_tracks.is_empty() || validation_tracks.is_empty() {
        return Err(Error::dataset("training needs at least one train and one validation track"));
    }
    if let Some(shared) = train_tracks
        .iter()
        .find(|t| validation_tracks.iter().any(|v| v.name == t.name))
    {
        return Err(Error::dataset(format!(
            "track `{}` is in both the train and validation sets",
            shared.name
        )));
    }

    let sampler = SegmentSampler::new(*sampler_cfg, model.config(), train_tracks)?;
    let validation = validation_segments(&model, validation_tracks, sampler_cfg, cfg.validation_segments)?;
    let adam_cfg = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut optimizer = AdamState::new(adam_cfg, model.parameter_count())?;

    let mut history: Vec<EpochLosses> = Vec::new();
    let mut step_losses = Vec::with_capacity(cfg.steps_per_epoch * cfg.max_epochs.min(64));
    let mut best: Option<(usize, Checkpoint)> = None;
    let mut stopped_early = false;
    let scale = 1.0 / cfg.batch_size as f32;

    for epoch in 0..cfg.max_epochs {
        let mut epoch_loss = 0.0;
        for step in 0..cfg.steps_per_epoch {
            let global_step = (epoch * cfg.steps_per_epoch + step) as u64 + 1;
            let results: Vec<(f64, Vec<ConvParams<f32>>)> = (0..cfg.batch_size)
                .into_par_iter()
                .map(|b| {
                    let seed = stream_seed(sampler_cfg.rng_seed, epoch as u64, step as u64, b as u64);
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let segment = sampler.sample(&mut rng)?;
                    segment_gradients(&model, &segment, loss)
                })
                .collect::<Result<_>>()?;

            let mut batch_loss = 0.0;
            let mut grads: Vec<ConvParams<f32>> = model.kernels().iter().map(ConvParams::zeros_like).collect();
            for (value, g) in &results {
                batch_loss += value;
                for (acc, k) in grads.iter_mut().zip(g) {
                    for (a, &v) in acc.values_mut().zip(k.values()) {
                        *a += v;
                    }
                }
            }
            batch_loss /= cfg.batch_size as f64;
            for v in grads.iter_mut().flat_map(ConvParams::values_mut) {
                *v *= scale;
            }

            let diverged = |reason: String, best: &Option<(usize, Checkpoint)>| Error::Diverged {
                step: global_step,
                reason,
                last_good: best.as_ref().map(|(_, c)| Box::new(c.clone())),
            };
            if !batch_loss.is_finite() {
                return Err(diverged(format!("loss became {batch_loss}"), &best));
            }
            if let Err(e) = optimizer.step(model.kernels_mut(), &grads) {
                return Err(match e {
                    Error::Diverged { reason, .. } => diverged(reason, &best),
                    other => other,
                });
            }
            step_losses.push(batch_loss);
            epoch_loss += batch_loss;
        }

        let train_loss = epoch_loss / cfg.steps_per_epoch as f64;
        let val_loss = validation_loss(&model, &validation, loss)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged {
                step: ((epoch + 1) * cfg.steps_per_epoch) as u64,
                reason: format!("validation loss became {val_loss}"),
                last_good: best.as_ref().map(|(_, c)| Box::new(c.clone())),
            });
        }
        history.push(EpochLosses {
            train: train_loss,
            validation: val_loss,
        });
        info!("epoch {epoch}: train {train_loss:.6} validation {val_loss:.6}");

        let improved = best
            .as_ref()
            .map_or(true, |(e, _)| val_loss < history[*e].validation);
        if improved {
            best = Some((epoch, Checkpoint::new(&model, optimizer.clone(), Vec::new())));
        }
        let best_epoch = best.as_ref().map_or(0, |(e, _)| *e);
        if epoch - best_epoch >= cfg.patience_epochs {
            stopped_early = true;
            break;
        }
    }

    let (best_epoch, mut best) = best.ok_or_else(|| Error::Internal("no epoch completed".into()))?;
    best.history = history.clone();
    let last = Checkpoint::new(&model, optimizer, history.clone());
    Ok(TrainOutcome {
        best,
        last,
        best_epoch,
        history,
        step_losses,
        stopped_early,
        sampler_fallbacks: sampler.fallback_count(),
    })
}

/// Finite-difference check, in 64-bit, of the loss gradient with respect to
/// every kernel parameter of `model` on one segment.
pub fn check_loss_gradients(
    model: &Model<f64>,
    input: &[f64],
    targets: &FeatureMap<f64>,
    loss: &LossConfig,
    h: f64,
    max_params: Option<usize>,
) -> Result<GradCheckReport> {
    let input = FeatureMap::from_waveform(input.to_vec())?;
    grad_check(
        model.kernels(),
        |kernels| {
            let mut tape = Tape::new();
            let x = tape.input(input.clone());
            let out = model.trace(&mut tape, x, kernels)?;
            let (value, grad) = loss_total_with_grad(tape.value(out), targets, loss)?;
            let head = tape.scalar_head(out, value, grad)?;
            Ok((value, tape.backward(head, kernels)?))
        },
        h,
        max_params,
    )
}

/// Index of the smallest validation loss; ties go to the earliest epoch.
pub fn best_epoch(history: &[EpochLosses]) -> Option<usize> {
    history
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, e)| match best {
            Some((_, v)) if v <= e.validation => best,
            _ => Some((i, e.validation)),
        })
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn losses(vals: &[f64]) -> Vec<EpochLosses> {
        vals.iter()
            .map(|&v| EpochLosses {
                train: 0.0,
                validation: v,
            })
            .collect()
    }

    #[test]
    fn argmin_prefers_earliest() {
        assert_eq!(best_epoch(&losses(&[3.0, 1.0, 2.0, 1.0])), Some(1));
        assert_eq!(best_epoch(&losses(&[])), None);
    }

    #[test]
    fn zero_patience_rejected() {
        let cfg = TrainConfig {
            patience_epochs: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn stream_seeds_differ() {
        let a = stream_seed(1, 0, 0, 0);
        assert_ne!(a, stream_seed(1, 0, 0, 1));
        assert_ne!(a, stream_seed(1, 0, 1, 0));
        assert_ne!(a, stream_seed(1, 1, 0, 0));
        assert_eq!(a, stream_seed(1, 0, 0, 0));
    }
}
