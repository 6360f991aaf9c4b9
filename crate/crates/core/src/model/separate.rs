use rayon::prelude::*;

use super::network::Model;
use crate::error::{Error, Result};

/// Named single-channel waveforms of equal length.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceEstimates {
    names: Vec<String>,
    waveforms: Vec<Vec<f32>>,
}

impl SourceEstimates {
    pub fn new(names: Vec<String>, waveforms: Vec<Vec<f32>>) -> Result<Self> {
        if names.len() != waveforms.len() {
            return Err(Error::shape("one name per waveform required"));
        }
        if let Some(first) = waveforms.first() {
            if waveforms.iter().any(|w| w.len() != first.len()) {
                return Err(Error::shape("source estimates differ in length"));
            }
        }
        Ok(Self { names, waveforms })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn waveforms(&self) -> &[Vec<f32>] {
        &self.waveforms
    }

    pub fn get(&self, name: &str) -> Option<&[f32]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.waveforms[i].as_slice())
    }

    pub fn len(&self) -> usize {
        self.waveforms.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_sources(&self) -> usize {
        self.names.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.names.iter().map(String::as_str).zip(self.waveforms.iter().map(Vec::as_slice))
    }
}

impl Model<f32> {
    /// Separates a whole track by tiling it into consecutive target fields.
    ///
    /// The mixture is zero-padded by half the receptive field on each side and
    /// the last tile is zero-padded to a full target field; the result is
    /// trimmed back to the mixture length.
    pub fn separate_track(&self, mixture: &[f32], sample_rate: u32) -> Result<SourceEstimates> {
        let cfg = self.config();
        if sample_rate != cfg.sample_rate {
            return Err(Error::config(format!(
                "mixture is sampled at {sample_rate} Hz but the model expects {} Hz",
                cfg.sample_rate
            )));
        }
        if mixture.is_empty() {
            return Err(Error::shape("mixture is empty"));
        }
        let tf = cfg.target_field;
        let tiles = mixture.len().div_ceil(tf);
        let pad = cfg.half_context();
        let mut padded = vec![0.0f32; tiles * tf + cfg.receptive_field() - 1];
        padded[pad..pad + mixture.len()].copy_from_slice(mixture);

        let outputs: Vec<_> = (0..tiles)
            .into_par_iter()
            .map(|i| self.forward(&padded[i * tf..i * tf + cfg.input_field()]))
            .collect::<Result<_>>()?;

        let mut waveforms = vec![Vec::with_capacity(tiles * tf); cfg.num_outputs];
        for out in &outputs {
            for (c, w) in waveforms.iter_mut().enumerate() {
                w.extend_from_slice(out.channel(c));
            }
        }
        for w in &mut waveforms {
            w.truncate(mixture.len());
        }
        SourceEstimates::new(cfg.source_names(), waveforms)
    }
}

/// Appends `residual_name = mixture - sum(estimates)`.
pub fn complete_sources(mixture: &[f32], estimates: &SourceEstimates, residual_name: &str) -> Result<SourceEstimates> {
    if estimates.num_sources() > 0 && estimates.len() != mixture.len() {
        return Err(Error::shape(format!(
            "mixture has {} samples, estimates have {}",
            mixture.len(),
            estimates.len()
        )));
    }
    let residual: Vec<f32> = (0..mixture.len())
        .map(|t| {
            let sum: f64 = estimates.waveforms.iter().map(|w| f64::from(w[t])).sum();
            (f64::from(mixture[t]) - sum) as f32
        })
        .collect();
    let mut names = estimates.names.clone();
    let mut waveforms = estimates.waveforms.clone();
    names.push(residual_name.to_string());
    waveforms.push(residual);
    SourceEstimates::new(names, waveforms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn tiny() -> ModelConfig {
        ModelConfig {
            stacks: 1,
            filters: 3,
            dilation_depth: 2,
            target_field: 5,
            num_outputs: 1,
            sample_rate: 8000,
            post_filters: [4, 4],
        }
    }

    #[test]
    fn tiling_lengths() {
        let model: Model<f32> = Model::new(tiny(), 3).unwrap();
        for len in [15, 6, 1, 5, 4] {
            let x: Vec<f32> = (0..len).map(|i| (i as f32).sin() * 0.5).collect();
            let est = model.separate_track(&x, 8000).unwrap();
            assert_eq!(est.len(), len);
        }
    }

    #[test]
    fn zero_mixture_zero_bias_model() {
        let mut model: Model<f32> = Model::new(tiny(), 3).unwrap();
        for k in model.kernels_mut() {
            k.bias.fill(0.0);
        }
        let est = model.separate_track(&[0.0; 23], 8000).unwrap();
        assert!(est.waveforms()[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rate_mismatch() {
        let model: Model<f32> = Model::new(tiny(), 3).unwrap();
        assert!(matches!(model.separate_track(&[0.0; 4], 16_000), Err(Error::Config(_))));
    }

    #[test]
    fn residual_arithmetic() {
        let est = SourceEstimates::new(vec!["vocals".into()], vec![vec![0.4]]).unwrap();
        let full = complete_sources(&[1.0], &est, "accompaniment").unwrap();
        assert_eq!(full.names(), ["vocals", "accompaniment"]);
        assert!((full.get("accompaniment").unwrap()[0] - 0.6).abs() < 1e-7);

        let exact = SourceEstimates::new(vec!["a".into(), "b".into()], vec![vec![0.25, -1.0], vec![0.5, 0.5]]).unwrap();
        let full = complete_sources(&[0.75, -0.5], &exact, "other").unwrap();
        assert_eq!(full.get("other").unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn residual_length_mismatch() {
        let est = SourceEstimates::new(vec!["vocals".into()], vec![vec![0.4, 0.1]]).unwrap();
        assert!(matches!(complete_sources(&[1.0], &est, "x"), Err(Error::Shape(_))));
    }
}
