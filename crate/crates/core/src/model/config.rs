use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of the input projection, the dilated layers, and both post-processing convs.
pub const WIDE_KERNEL: usize = 3;

/// Architecture hyper-parameters of the non-causal Wavenet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of repetitions of the dilation pattern.
    pub stacks: usize,
    /// Channels in every residual, skip, and dilated block.
    pub filters: usize,
    /// Layers per stack; layer `i` of a stack has dilation `2^i`.
    pub dilation_depth: usize,
    /// Output samples predicted per forward pass.
    pub target_field: usize,
    /// Sources regressed directly; the remaining one is completed by subtraction.
    pub num_outputs: usize,
    pub sample_rate: u32,
    /// Channel counts of the two post-processing 3-tap convolutions.
    pub post_filters: [usize; 2],
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            stacks: 4,
            filters: 64,
            dilation_depth: 10,
            target_field: 1600,
            num_outputs: 3,
            sample_rate: 16_000,
            post_filters: [2048, 256],
        }
    }
}

impl ModelConfig {
    pub fn new(stacks: usize, filters: usize, num_outputs: usize) -> Self {
        Self {
            stacks,
            filters,
            num_outputs,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("stacks", self.stacks),
            ("filters", self.filters),
            ("dilation_depth", self.dilation_depth),
            ("target_field", self.target_field),
            ("num_outputs", self.num_outputs),
            ("post_filters[0]", self.post_filters[0]),
            ("post_filters[1]", self.post_filters[1]),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::config(format!("{name} must be positive")));
        }
        if self.sample_rate == 0 {
            return Err(Error::config("sample_rate must be positive"));
        }
        if self.dilation_depth > 24 {
            return Err(Error::config(format!(
                "dilation_depth {} is unreasonably large",
                self.dilation_depth
            )));
        }
        Ok(())
    }

    /// Dilation of residual layer `layer` (counted over all stacks).
    pub fn dilation(&self, layer: usize) -> usize {
        1 << (layer % self.dilation_depth)
    }

    pub fn layer_count(&self) -> usize {
        self.stacks * self.dilation_depth
    }

    pub fn dilations(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.layer_count()).map(|l| self.dilation(l))
    }

    /// Input samples that influence one output sample.
    pub fn receptive_field(&self) -> usize {
        let input_proj = WIDE_KERNEL - 1;
        let layers: usize = self.dilations().map(|d| d * (WIDE_KERNEL - 1)).sum();
        let post = 2 * (WIDE_KERNEL - 1);
        1 + input_proj + layers + post
    }

    pub fn receptive_field_ms(&self) -> f64 {
        self.samples_to_ms(self.receptive_field())
    }

    pub fn target_field_ms(&self) -> f64 {
        self.samples_to_ms(self.target_field)
    }

    fn samples_to_ms(&self, samples: usize) -> f64 {
        samples as f64 * 1000.0 / f64::from(self.sample_rate)
    }

    /// Samples consumed by one forward pass.
    pub fn input_field(&self) -> usize {
        self.target_field + self.receptive_field() - 1
    }

    /// Zero context added on each side of a track before tiling.
    pub fn half_context(&self) -> usize {
        (self.receptive_field() - 1) / 2
    }

    /// Exact number of weights and biases over every kernel of the model.
    pub fn parameter_count(&self) -> usize {
        let conv = |out: usize, inp: usize, width: usize| out * inp * width + out;
        let k = self.filters;
        let [p1, p2] = self.post_filters;
        let per_layer = conv(2 * k, k, WIDE_KERNEL) + 2 * conv(k, k, 1);
        conv(k, 1, WIDE_KERNEL)
            + self.layer_count() * per_layer
            + conv(p1, k, WIDE_KERNEL)
            + conv(p2, p1, WIDE_KERNEL)
            + conv(self.num_outputs, p2, 1)
    }

    /// Names of the directly regressed sources, in output-channel order.
    pub fn source_names(&self) -> Vec<String> {
        match self.num_outputs {
            3 => ["vocals", "drums", "bass"].map(String::from).to_vec(),
            1 => vec!["vocals".to_string()],
            n => (0..n).map(|i| format!("source{i}")).collect(),
        }
    }

    /// Name of the source completed by subtracting the estimates from the mixture.
    pub fn residual_name(&self) -> &'static str {
        match self.num_outputs {
            3 => "other",
            1 => "accompaniment",
            _ => "residual",
        }
    }

    /// Every emitted source: the regressed ones followed by the residual.
    pub fn all_source_names(&self) -> Vec<String> {
        let mut names = self.source_names();
        names.push(self.residual_name().to_string());
        names
    }
}
