use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, WIDE_KERNEL};
use crate::error::{Error, Result};
use crate::nn::{ConvParams, FeatureMap, NodeId, Real, Tape};

/// The non-causal Wavenet. Kernels are stored in declared order: input
/// projection; per residual layer the dilated conv, residual 1x1 and skip
/// 1x1; then both post-processing convs and the output projection.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T = f32> {
    config: ModelConfig,
    kernels: Vec<ConvParams<T>>,
}

/// Expected `(out, in, width, dilation)` of every kernel, in declared order.
pub fn kernel_shapes(config: &ModelConfig) -> Vec<(usize, usize, usize, usize)> {
    let k = config.filters;
    let [p1, p2] = config.post_filters;
    let mut shapes = vec![(k, 1, WIDE_KERNEL, 1)];
    for d in config.dilations() {
        shapes.push((2 * k, k, WIDE_KERNEL, d));
        shapes.push((k, k, 1, 1));
        shapes.push((k, k, 1, 1));
    }
    shapes.push((p1, k, WIDE_KERNEL, 1));
    shapes.push((p2, p1, WIDE_KERNEL, 1));
    shapes.push((config.num_outputs, p2, 1, 1));
    shapes
}

impl<T: Real> Model<T> {
    /// Randomly initialised model; identical seeds give identical parameters.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kernels = kernel_shapes(&config)
            .into_iter()
            .map(|(o, i, w, d)| {
                let mut k = ConvParams::zeros(o, i, w, d);
                k.init_uniform(&mut rng);
                k
            })
            .collect();
        Ok(Self { config, kernels })
    }

    pub fn from_kernels(config: ModelConfig, kernels: Vec<ConvParams<T>>) -> Result<Self> {
        config.validate()?;
        let shapes = kernel_shapes(&config);
        if shapes.len() != kernels.len() {
            return Err(Error::config(format!(
                "configuration needs {} kernels, got {}",
                shapes.len(),
                kernels.len()
            )));
        }
        for (idx, ((o, i, w, d), k)) in shapes.iter().zip(&kernels).enumerate() {
            if (k.out_channels(), k.in_channels(), k.width(), k.dilation()) != (*o, *i, *w, *d) {
                return Err(Error::config(format!("kernel {idx} does not match the configuration")));
            }
        }
        Ok(Self { config, kernels })
    }

    /// Rebuilds a model from a flat parameter vector in declared kernel order.
    pub fn from_flat(config: ModelConfig, flat: &[T]) -> Result<Self> {
        config.validate()?;
        if flat.len() != config.parameter_count() {
            return Err(Error::config(format!(
                "configuration has {} parameters, got {}",
                config.parameter_count(),
                flat.len()
            )));
        }
        let mut rest = flat;
        let mut kernels = Vec::new();
        for (o, i, w, d) in kernel_shapes(&config) {
            let nw = o * i * w;
            let (weights, tail) = rest.split_at(nw);
            let (bias, tail) = tail.split_at(o);
            kernels.push(ConvParams::from_parts(o, i, w, d, weights.to_vec(), bias.to_vec())?);
            rest = tail;
        }
        Ok(Self { config, kernels })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn kernels(&self) -> &[ConvParams<T>] {
        &self.kernels
    }

    pub fn kernels_mut(&mut self) -> &mut [ConvParams<T>] {
        &mut self.kernels
    }

    pub fn flat_params(&self) -> Vec<T> {
        self.kernels.iter().flat_map(|k| k.values().copied()).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.kernels.iter().map(ConvParams::param_count).sum()
    }

    pub fn output_proj_mut(&mut self) -> &mut ConvParams<T> {
        self.kernels.last_mut().expect("model has kernels")
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            kernels: self.kernels.iter().map(ConvParams::cast).collect(),
        }
    }

    /// Records the forward pass of `input` (one channel, `input_field` long)
    /// on `tape` using `kernels`, which must have this model's layout.
    /// Returns the node holding the `(num_outputs, target_field)` estimates.
    pub fn trace(&self, tape: &mut Tape<T>, input: NodeId, kernels: &[ConvParams<T>]) -> Result<NodeId> {
        let cfg = &self.config;
        let shape = tape.value(input).shape();
        if shape != (1, cfg.input_field()) {
            return Err(Error::shape(format!(
                "segment must be 1 x {} samples, got {} x {}",
                cfg.input_field(),
                shape.0,
                shape.1
            )));
        }
        let skip_len = cfg.target_field + 2 * (WIDE_KERNEL - 1);
        let layers = cfg.layer_count();

        let mut h = tape.conv(input, kernels, 0)?;
        let mut skip_sum: Option<NodeId> = None;
        for layer in 0..layers {
            let base = 1 + 3 * layer;
            let pre = tape.conv(h, kernels, base)?;
            let gated = tape.gated(pre)?;

            let skip = tape.conv(gated, kernels, base + 2)?;
            let skip = tape.center_crop(skip, skip_len)?;
            skip_sum = Some(match skip_sum {
                Some(acc) => tape.add(acc, skip)?,
                None => skip,
            });

            // the last layer's residual output feeds nothing
            if layer + 1 < layers {
                let res = tape.conv(gated, kernels, base + 1)?;
                let len = tape.value(res).time_steps();
                let shortcut = tape.center_crop(h, len)?;
                h = tape.add(shortcut, res)?;
            }
        }
        let post = 1 + 3 * layers;
        let skip_sum = skip_sum.ok_or_else(|| Error::config("model has no residual layers"))?;
        let x = tape.relu(skip_sum);
        let x = tape.conv(x, kernels, post)?;
        let x = tape.relu(x);
        let x = tape.conv(x, kernels, post + 1)?;
        tape.conv(x, kernels, post + 2)
    }

    /// Estimates for one segment of exactly `input_field` samples.
    pub fn forward(&self, segment: &[T]) -> Result<FeatureMap<T>> {
        if segment.len() != self.config.input_field() {
            return Err(Error::shape(format!(
                "segment must be {} samples, got {}",
                self.config.input_field(),
                segment.len()
            )));
        }
        if segment.iter().any(|v| !v.is_finite()) {
            return Err(Error::shape("segment contains non-finite samples"));
        }
        let mut tape = Tape::new();
        let input = tape.input(FeatureMap::from_waveform(segment.to_vec())?);
        let out = self.trace(&mut tape, input, &self.kernels)?;
        let value = tape.value(out).clone();
        if !value.is_finite() {
            return Err(Error::Diverged {
                step: 0,
                reason: "forward pass produced non-finite estimates".into(),
                last_good: None,
            });
        }
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny(num_outputs: usize) -> ModelConfig {
        ModelConfig {
            stacks: 1,
            filters: 4,
            dilation_depth: 3,
            target_field: 8,
            num_outputs,
            sample_rate: 16_000,
            post_filters: [8, 6],
        }
    }

    #[test]
    fn output_shape_law() {
        let model: Model<f32> = Model::new(tiny(3), 1).unwrap();
        let x: Vec<f32> = (0..model.config().input_field()).map(|i| (i as f32 * 0.37).sin()).collect();
        let y = model.forward(&x).unwrap();
        assert_eq!(y.shape(), (3, 8));
    }

    #[test]
    fn zero_output_projection_gives_zero_estimates() {
        let mut model: Model<f32> = Model::new(tiny(2), 5).unwrap();
        model.output_proj_mut().zero();
        let x: Vec<f32> = (0..model.config().input_field()).map(|i| i as f32 * 0.01 - 0.2).collect();
        assert!(model.forward(&x).unwrap().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a: Model<f32> = Model::new(tiny(1), 9).unwrap();
        let b: Model<f32> = Model::new(tiny(1), 9).unwrap();
        assert_eq!(a, b);
        let x: Vec<f32> = (0..a.config().input_field()).map(|i| ((i * 7919) % 13) as f32 / 13.0).collect();
        let ya = a.forward(&x).unwrap();
        let yb = b.forward(&x).unwrap();
        assert!(ya.as_slice().iter().zip(yb.as_slice()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn wrong_segment_length() {
        let model: Model<f32> = Model::new(tiny(1), 0).unwrap();
        let err = model.forward(&[0.0; 10]).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn kernel_layout_matches_count() {
        for (n, k) in [(1, 512), (2, 256), (4, 64)] {
            let cfg = ModelConfig::new(n, k, 3);
            let total: usize = kernel_shapes(&cfg).iter().map(|(o, i, w, _)| o * i * w + o).sum();
            assert_eq!(total, cfg.parameter_count());
        }
        let model: Model<f32> = Model::new(tiny(3), 2).unwrap();
        assert_eq!(model.parameter_count(), model.config().parameter_count());
        let rebuilt = Model::from_flat(model.config().clone(), &model.flat_params()).unwrap();
        assert_eq!(rebuilt, model);
    }
}
