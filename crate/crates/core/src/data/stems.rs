use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::wav::read_wav;
use crate::error::{Error, Result};

pub const MULTI_INSTRUMENT_STEMS: [&str; 4] = ["vocals", "drums", "bass", "other"];
pub const SINGING_VOICE_STEMS: [&str; 2] = ["vocals", "accompaniment"];

/// Per-sample tolerance between a stored mixture and the sum of its stems.
pub const MIXTURE_TOLERANCE: f32 = 1e-3;

/// A mixture with its reference stems, all of equal length and sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackStems {
    pub name: String,
    pub sample_rate: u32,
    pub mixture: Vec<f32>,
    pub sources: BTreeMap<String, Vec<f32>>,
}

impl TrackStems {
    pub fn new(
        name: impl Into<String>,
        sample_rate: u32,
        mixture: Vec<f32>,
        sources: BTreeMap<String, Vec<f32>>,
    ) -> Result<Self> {
        let name = name.into();
        let mismatched: Vec<String> = sources
            .iter()
            .filter(|(_, w)| w.len() != mixture.len())
            .map(|(n, w)| format!("{n}={}", w.len()))
            .collect();
        if !mismatched.is_empty() {
            return Err(Error::dataset(format!(
                "track `{name}`: stem lengths differ from mixture length {} ({})",
                mixture.len(),
                mismatched.join(", ")
            )));
        }
        Ok(Self {
            name,
            sample_rate,
            mixture,
            sources,
        })
    }

    /// Builds a track whose mixture is the clamped sum of `sources`.
    pub fn from_sources(name: impl Into<String>, sample_rate: u32, sources: BTreeMap<String, Vec<f32>>) -> Result<Self> {
        let name = name.into();
        let mixture = synthesize_mixture(&name, &sources)?
            .into_iter()
            .map(|v| v.clamp(-1.0, 1.0))
            .collect();
        Self::new(name, sample_rate, mixture, sources)
    }

    pub fn len(&self) -> usize {
        self.mixture.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mixture.is_empty()
    }

    pub fn source(&self, name: &str) -> Option<&[f32]> {
        self.sources.get(name).map(Vec::as_slice)
    }

    /// Reference waveform for `name`. A missing `accompaniment` is derived
    /// as the sum of every non-vocal stem.
    pub fn reference(&self, name: &str) -> Option<Vec<f32>> {
        if let Some(s) = self.source(name) {
            return Some(s.to_vec());
        }
        if name == "accompaniment" {
            let others: Vec<&Vec<f32>> = self
                .sources
                .iter()
                .filter(|(n, _)| n.as_str() != "vocals")
                .map(|(_, w)| w)
                .collect();
            if others.is_empty() {
                return None;
            }
            return Some(
                (0..self.len())
                    .map(|t| others.iter().map(|w| f64::from(w[t])).sum::<f64>() as f32)
                    .collect(),
            );
        }
        None
    }

    /// Largest per-sample deviation between the mixture and the stem sum.
    pub fn mixture_deviation(&self) -> f32 {
        let sum = synthesize_mixture(&self.name, &self.sources).unwrap_or_default();
        sum.iter()
            .zip(&self.mixture)
            .map(|(s, m)| (s - m).abs())
            .fold(0.0, f32::max)
    }
}

/// Unclamped sum of all stems.
pub fn synthesize_mixture(track: &str, sources: &BTreeMap<String, Vec<f32>>) -> Result<Vec<f32>> {
    let len = sources
        .values()
        .next()
        .map(Vec::len)
        .ok_or_else(|| Error::dataset(format!("track `{track}` has no stems")))?;
    if sources.values().any(|w| w.len() != len) {
        let lengths: Vec<String> = sources.iter().map(|(n, w)| format!("{n}={}", w.len())).collect();
        return Err(Error::dataset(format!(
            "track `{track}`: stems differ in length ({})",
            lengths.join(", ")
        )));
    }
    Ok((0..len)
        .map(|t| sources.values().map(|w| f64::from(w[t])).sum::<f64>() as f32)
        .collect())
}

fn read_checked(path: &Path, track: &str, expected_rate: u32) -> Result<Vec<f32>> {
    let (samples, rate) = read_wav(path)?;
    if rate != expected_rate {
        return Err(Error::dataset(format!(
            "track `{track}`: {} is sampled at {rate} Hz; resample externally to {} kHz",
            path.display(),
            f64::from(expected_rate) / 1000.0
        )));
    }
    Ok(samples)
}

/// Loads `dir/{mixture.wav, <stems>.wav}`. The stem set is either
/// vocals/drums/bass/other or vocals/accompaniment; a missing mixture is
/// synthesised from the stems.
pub fn load_track(dir: &Path, expected_rate: u32) -> Result<TrackStems> {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    let has = |stem: &str| dir.join(format!("{stem}.wav")).is_file();
    let layout: &[&str] = if has("accompaniment") && !has("drums") {
        &SINGING_VOICE_STEMS
    } else {
        &MULTI_INSTRUMENT_STEMS
    };
    let missing: Vec<&str> = layout.iter().copied().filter(|s| !has(s)).collect();
    if !missing.is_empty() {
        return Err(Error::dataset(format!(
            "track `{name}` is missing stem(s): {}",
            missing.join(", ")
        )));
    }
    let mut sources = BTreeMap::new();
    for stem in layout {
        let samples = read_checked(&dir.join(format!("{stem}.wav")), &name, expected_rate)?;
        sources.insert(stem.to_string(), samples);
    }
    let sum = synthesize_mixture(&name, &sources)?;
    let mixture_path = dir.join("mixture.wav");
    let track = if mixture_path.is_file() {
        let mixture = read_checked(&mixture_path, &name, expected_rate)?;
        let track = TrackStems::new(name, expected_rate, mixture, sources)?;
        let deviation = track.mixture_deviation();
        if deviation > MIXTURE_TOLERANCE {
            warn!(
                "track `{}`: mixture deviates from the stem sum by up to {deviation:.2e}",
                track.name
            );
        }
        track
    } else {
        let mixture = sum.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        TrackStems::new(name, expected_rate, mixture, sources)?
    };
    if track
        .sources
        .values()
        .chain(std::iter::once(&track.mixture))
        .flatten()
        .any(|v| !v.is_finite() || v.abs() > 1.0)
    {
        warn!("track `{}` has samples outside [-1, 1]", track.name);
    }
    Ok(track)
}

/// Track sub-directories of `root`, sorted byte-wise by name.
pub fn track_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::dataset(format!("cannot list {}: {e}", root.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort_by(|a, b| {
        let key = |p: &PathBuf| p.file_name().map(|n| n.as_encoded_bytes().to_vec()).unwrap_or_default();
        key(a).cmp(&key(b))
    });
    Ok(dirs)
}

/// Loads every track under `root`, in byte-wise lexicographic order.
pub fn load_stem_directory(root: impl AsRef<Path>, expected_rate: u32) -> Result<Vec<TrackStems>> {
    let dirs = track_dirs(root.as_ref())?;
    dirs.par_iter().map(|d| load_track(d, expected_rate)).collect()
}

/// Train/validation/test split, stored as `dataset.json`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    #[serde(default)]
    pub test: Vec<String>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::dataset(format!("cannot read manifest {}: {e}", path.display())))?;
        let manifest: Self = serde_json::from_str(&text)
            .map_err(|e| Error::dataset(format!("invalid manifest {}: {e}", path.display())))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let splits = [("train", &self.train), ("validation", &self.validation), ("test", &self.test)];
        for (i, (a, xs)) in splits.iter().enumerate() {
            for (b, ys) in &splits[i + 1..] {
                if let Some(dup) = xs.iter().find(|x| ys.contains(x)) {
                    return Err(Error::dataset(format!("track `{dup}` appears in both {a} and {b}")));
                }
            }
        }
        Ok(())
    }

    pub fn split(&self, name: &str) -> Result<&[String]> {
        match name {
            "train" => Ok(&self.train),
            "validation" => Ok(&self.validation),
            "test" => Ok(&self.test),
            other => Err(Error::config(format!("unknown split `{other}`"))),
        }
    }
}

/// Loads the named tracks from `root`, in the given order.
pub fn load_tracks(root: impl AsRef<Path>, names: &[String], expected_rate: u32) -> Result<Vec<TrackStems>> {
    let root = root.as_ref();
    names
        .par_iter()
        .map(|n| {
            let dir = root.join(n);
            if !dir.is_dir() {
                return Err(Error::dataset(format!("track `{n}` not found under {}", root.display())));
            }
            load_track(&dir, expected_rate)
        })
        .collect()
}
