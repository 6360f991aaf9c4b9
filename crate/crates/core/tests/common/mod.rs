#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavesep::data::{write_wav, TrackStems};
use wavesep::model::ModelConfig;

pub const RATE: u32 = 16_000;

/// 440 Hz tone switched on and off every half second.
pub fn gated_tone(len: usize, amplitude: f64) -> Vec<f32> {
    (0..len)
        .map(|t| {
            if (t / (RATE as usize / 2)) % 2 == 0 {
                (amplitude * (2.0 * PI * 440.0 * t as f64 / f64::from(RATE)).sin()) as f32
            } else {
                0.0
            }
        })
        .collect()
}

/// First-differenced white noise (high-pass filtered).
pub fn filtered_noise(len: usize, amplitude: f32, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f32> = (0..=len).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    white.windows(2).map(|w| amplitude * (w[1] - w[0])).collect()
}

/// Singing-voice track: gated tone vocals over filtered-noise accompaniment.
pub fn tone_track(name: &str, seconds: f64, seed: u64) -> TrackStems {
    let len = (seconds * f64::from(RATE)) as usize;
    let sources = BTreeMap::from([
        ("vocals".to_string(), gated_tone(len, 0.5)),
        ("accompaniment".to_string(), filtered_noise(len, 0.15, seed)),
    ]);
    TrackStems::from_sources(name, RATE, sources).unwrap()
}

/// Track whose vocals are active in the first half only.
pub fn half_voiced_track(len: usize) -> TrackStems {
    let vocals: Vec<f32> = (0..len)
        .map(|t| if t < len / 2 { 0.3 * (t as f32 * 0.2).sin() } else { 0.0 })
        .collect();
    let sources = BTreeMap::from([
        ("vocals".to_string(), vocals),
        ("accompaniment".to_string(), filtered_noise(len, 0.1, 1)),
    ]);
    TrackStems::from_sources("half", RATE, sources).unwrap()
}

/// Writes stems of every track under `root/<name>/` plus `root/dataset.json`.
pub fn write_dataset(root: &Path, train: &[TrackStems], validation: &[TrackStems]) {
    for t in train.iter().chain(validation) {
        let dir = root.join(&t.name);
        fs::create_dir_all(&dir).unwrap();
        for (stem, wave) in &t.sources {
            write_wav(dir.join(format!("{stem}.wav")), wave, t.sample_rate).unwrap();
        }
    }
    let names = |ts: &[TrackStems]| ts.iter().map(|t| format!("\"{}\"", t.name)).collect::<Vec<_>>().join(", ");
    let manifest = format!("{{\"train\": [{}], \"validation\": [{}]}}", names(train), names(validation));
    fs::write(root.join("dataset.json"), manifest).unwrap();
}

/// Small singing-voice model used where training speed matters.
pub fn small_config(target_field: usize) -> ModelConfig {
    ModelConfig {
        stacks: 1,
        filters: 4,
        dilation_depth: 3,
        target_field,
        num_outputs: 1,
        sample_rate: RATE,
        post_filters: [8, 4],
    }
}
