use rand::Rng;

use super::tensor::{FeatureMap, Real};
use crate::error::{Error, Result};

/// Kernel of a 1-D valid convolution. Weights are laid out
/// `[out_channel][in_channel][tap]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams<T = f32> {
    out_channels: usize,
    in_channels: usize,
    width: usize,
    dilation: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> ConvParams<T> {
    pub fn zeros(out_channels: usize, in_channels: usize, width: usize, dilation: usize) -> Self {
        assert!(
            out_channels > 0 && in_channels > 0 && width > 0 && dilation > 0,
            "degenerate kernel shape"
        );
        Self {
            out_channels,
            in_channels,
            width,
            dilation,
            weights: vec![T::zero(); out_channels * in_channels * width],
            bias: vec![T::zero(); out_channels],
        }
    }

    pub fn from_parts(
        out_channels: usize,
        in_channels: usize,
        width: usize,
        dilation: usize,
        weights: Vec<T>,
        bias: Vec<T>,
    ) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 || width == 0 || dilation == 0 {
            return Err(Error::config("kernel dimensions and dilation must be positive"));
        }
        if weights.len() != out_channels * in_channels * width || bias.len() != out_channels {
            return Err(Error::shape(format!(
                "kernel {out_channels}x{in_channels}x{width} got {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self {
            out_channels,
            in_channels,
            width,
            dilation,
            weights,
            bias,
        })
    }

    /// Centered uniform init in `[-s, s]`, `s = 1/sqrt(in_channels * width)`,
    /// applied to weights and biases alike.
    pub fn init_uniform<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let scale = 1.0 / ((self.in_channels * self.width) as f64).sqrt();
        for v in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            *v = T::from_f64_lossy(rng.gen_range(-scale..=scale));
        }
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dilation(&self) -> usize {
        self.dilation
    }

    /// Number of time steps the kernel consumes beyond the first.
    pub fn span(&self) -> usize {
        self.dilation * (self.width - 1)
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn weight(&self, out: usize, inp: usize, tap: usize) -> T {
        self.weights[(out * self.in_channels + inp) * self.width + tap]
    }

    pub fn zero(&mut self) {
        self.weights.fill(T::zero());
        self.bias.fill(T::zero());
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.out_channels == other.out_channels
            && self.in_channels == other.in_channels
            && self.width == other.width
            && self.dilation == other.dilation
    }

    /// Zero-valued kernel of identical shape, used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.out_channels, self.in_channels, self.width, self.dilation)
    }

    /// Weights followed by biases.
    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.weights.iter().chain(self.bias.iter())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }

    pub fn cast<U: Real>(&self) -> ConvParams<U> {
        let conv = |v: &T| U::from_f64_lossy(v.to_f64_lossy());
        ConvParams {
            out_channels: self.out_channels,
            in_channels: self.in_channels,
            width: self.width,
            dilation: self.dilation,
            weights: self.weights.iter().map(conv).collect(),
            bias: self.bias.iter().map(conv).collect(),
        }
    }

    fn check_input(&self, input: &FeatureMap<T>) -> Result<usize> {
        if input.channels() != self.in_channels {
            return Err(Error::config(format!(
                "convolution expects {} input channels, got {}",
                self.in_channels,
                input.channels()
            )));
        }
        let needed = 1 + self.span();
        if input.time_steps() < needed {
            return Err(Error::InsufficientContext {
                needed,
                got: input.time_steps(),
            });
        }
        Ok(input.time_steps() - self.span())
    }
}

/// Valid (unpadded) dilated convolution:
/// `out[c, t] = bias[c] + sum_{i, w} weights[c, i, w] * input[i, t + w * dilation]`.
pub fn conv1d<T: Real>(input: &FeatureMap<T>, params: &ConvParams<T>) -> Result<FeatureMap<T>> {
    let out_len = params.check_input(input)?;
    let mut out = FeatureMap::zeros(params.out_channels, out_len);
    for c in 0..params.out_channels {
        let row = out.channel_mut(c);
        row.fill(params.bias[c]);
        for i in 0..params.in_channels {
            let x = input.channel(i);
            for w in 0..params.width {
                let k = params.weight(c, i, w);
                if k == T::zero() {
                    continue;
                }
                let shift = w * params.dilation;
                for (o, &v) in row.iter_mut().zip(&x[shift..shift + out_len]) {
                    *o += k * v;
                }
            }
        }
    }
    Ok(out)
}

/// Reverse pass of [`conv1d`]. Accumulates kernel gradients into `grads` and
/// returns the gradient with respect to the input when `want_input` is set.
pub fn conv1d_backward<T: Real>(
    input: &FeatureMap<T>,
    params: &ConvParams<T>,
    grad_out: &FeatureMap<T>,
    grads: &mut ConvParams<T>,
    want_input: bool,
) -> Result<Option<FeatureMap<T>>> {
    let out_len = params.check_input(input)?;
    if grad_out.shape() != (params.out_channels, out_len) {
        return Err(Error::Internal(format!(
            "conv gradient shape {:?} does not match output ({}, {out_len})",
            grad_out.shape(),
            params.out_channels
        )));
    }
    if !grads.same_shape(params) {
        return Err(Error::Internal("gradient accumulator shape mismatch".into()));
    }
    let mut grad_in = want_input.then(|| FeatureMap::zeros(input.channels(), input.time_steps()));
    for c in 0..params.out_channels {
        let g = grad_out.channel(c);
        grads.bias[c] += g.iter().copied().sum::<T>();
        for i in 0..params.in_channels {
            let x = input.channel(i);
            for w in 0..params.width {
                let shift = w * params.dilation;
                let idx = (c * params.in_channels + i) * params.width + w;
                let mut acc = T::zero();
                for (&gv, &xv) in g.iter().zip(&x[shift..shift + out_len]) {
                    acc += gv * xv;
                }
                grads.weights[idx] += acc;
                if let Some(gi) = grad_in.as_mut() {
                    let k = params.weights[idx];
                    if k != T::zero() {
                        for (d, &gv) in gi.channel_mut(i)[shift..shift + out_len].iter_mut().zip(g) {
                            *d += k * gv;
                        }
                    }
                }
            }
        }
    }
    Ok(grad_in)
}
