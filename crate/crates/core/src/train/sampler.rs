use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::TrackStems;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::nn::FeatureMap;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Probability of forcing the window onto a voiced region.
    pub p_voiced: f64,
    /// RMS above which a window of the vocal stem counts as voiced.
    pub voiced_rms_threshold: f64,
    pub rng_seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            p_voiced: 0.0,
            voiced_rms_threshold: 1e-3,
            rng_seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_voiced) {
            return Err(Error::config(format!("p_voiced must lie in [0, 1], got {}", self.p_voiced)));
        }
        if !(self.voiced_rms_threshold > 0.0 && self.voiced_rms_threshold.is_finite()) {
            return Err(Error::config(format!(
                "voiced_rms_threshold must be positive, got {}",
                self.voiced_rms_threshold
            )));
        }
        Ok(())
    }
}

pub fn rms(x: &[f32]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Window-aligned intervals `[k * window, (k + 1) * window)` whose vocal RMS
/// exceeds `threshold`. A window longer than the stem yields no intervals.
pub fn voiced_regions(vocal: &[f32], threshold: f64, window: usize) -> Result<Vec<Range<usize>>> {
    if !(threshold > 0.0) {
        return Err(Error::config(format!("voiced threshold must be positive, got {threshold}")));
    }
    if window == 0 {
        return Err(Error::config("window must be positive"));
    }
    Ok((0..vocal.len() / window)
        .map(|k| k * window..(k + 1) * window)
        .filter(|r| rms(&vocal[r.clone()]) > threshold)
        .collect())
}

/// One training example.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    /// Mixture over the target window plus half a receptive field each side.
    pub input: Vec<f32>,
    /// References of the regressed sources over the target window.
    pub targets: FeatureMap<f32>,
    pub track: usize,
    /// Start of the target window within the track.
    pub offset: usize,
    pub forced_voiced: bool,
}

/// Draws training segments from a set of tracks, forcing a share of them onto
/// voiced regions of the vocal stem.
#[derive(Debug)]
pub struct SegmentSampler<'a> {
    config: SamplerConfig,
    target_field: usize,
    half_context: usize,
    tracks: &'a [TrackStems],
    references: Vec<Vec<Vec<f32>>>,
    voiced: Vec<Vec<Range<usize>>>,
    fallbacks: AtomicU64,
}

impl<'a> SegmentSampler<'a> {
    pub fn new(config: SamplerConfig, model: &ModelConfig, tracks: &'a [TrackStems]) -> Result<Self> {
        config.validate()?;
        if tracks.is_empty() {
            return Err(Error::dataset("no tracks to sample from"));
        }
        let target_field = model.target_field;
        let names = model.source_names();
        let mut references = Vec::with_capacity(tracks.len());
        let mut voiced = Vec::with_capacity(tracks.len());
        for track in tracks {
            if track.len() < target_field {
                return Err(Error::dataset(format!(
                    "track `{}` has {} samples, fewer than the target field {target_field}",
                    track.name,
                    track.len()
                )));
            }
            if track.sample_rate != model.sample_rate {
                return Err(Error::config(format!(
                    "track `{}` is sampled at {} Hz, model expects {} Hz",
                    track.name, track.sample_rate, model.sample_rate
                )));
            }
            let refs = names
                .iter()
                .map(|n| {
                    track.reference(n).ok_or_else(|| {
                        Error::dataset(format!("track `{}` has no `{n}` reference", track.name))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            references.push(refs);
            let regions = match track.source("vocals") {
                Some(v) => voiced_regions(v, config.voiced_rms_threshold, target_field)?,
                None => Vec::new(),
            };
            voiced.push(regions);
        }
        Ok(Self {
            config,
            target_field,
            half_context: model.half_context(),
            tracks,
            references,
            voiced,
            fallbacks: AtomicU64::new(0),
        })
    }

    /// Forced draws that fell back to uniform because their track had no voiced window.
    pub fn fallback_count(&self) -> u64 {
        self.fallbacks.load(Ordering::Relaxed)
    }

    pub fn voiced_regions(&self, track: usize) -> &[Range<usize>] {
        &self.voiced[track]
    }

    /// Picks a track uniformly, then a window within it.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Segment> {
        let track = rng.gen_range(0..self.tracks.len());
        self.sample_from(track, rng)
    }

    pub fn sample_from<R: Rng + ?Sized>(&self, track: usize, rng: &mut R) -> Result<Segment> {
        let len = self.tracks[track].len();
        let force = self.config.p_voiced > 0.0 && rng.gen::<f64>() < self.config.p_voiced;
        let regions = &self.voiced[track];
        let (offset, forced_voiced) = if force && !regions.is_empty() {
            (regions[rng.gen_range(0..regions.len())].start, true)
        } else {
            if force {
                let n = self.fallbacks.fetch_add(1, Ordering::Relaxed);
                if n == 0 {
                    warn!(
                        "track `{}` has no voiced window; forced draws fall back to uniform",
                        self.tracks[track].name
                    );
                }
            }
            (rng.gen_range(0..=len - self.target_field), false)
        };
        self.segment_at(track, offset, forced_voiced)
    }

    /// Segment whose target window starts at `offset`.
    pub fn segment_at(&self, track: usize, offset: usize, forced_voiced: bool) -> Result<Segment> {
        let t = &self.tracks[track];
        let tf = self.target_field;
        if offset + tf > t.len() {
            return Err(Error::shape(format!("window at {offset} exceeds track `{}`", t.name)));
        }
        let mut input = vec![0.0f32; tf + 2 * self.half_context];
        // input[j] = mixture[offset - half + j], zero outside the track
        let start = offset as isize - self.half_context as isize;
        let lo = (-start).max(0) as usize;
        let hi = (t.len() as isize - start).min(input.len() as isize) as usize;
        input[lo..hi].copy_from_slice(&t.mixture[(start + lo as isize) as usize..(start + hi as isize) as usize]);

        let windows: Vec<&[f32]> = self.references[track].iter().map(|r| &r[offset..offset + tf]).collect();
        Ok(Segment {
            input,
            targets: FeatureMap::from_channels(&windows)?,
            track,
            offset,
            forced_voiced,
        })
    }
}

/// Draws one segment from a single track.
pub fn sample_segment<R: Rng + ?Sized>(
    track: &TrackStems,
    model: &ModelConfig,
    config: SamplerConfig,
    rng: &mut R,
) -> Result<Segment> {
    let tracks = std::slice::from_ref(track);
    SegmentSampler::new(config, model, tracks)?.sample_from(0, rng)
}
