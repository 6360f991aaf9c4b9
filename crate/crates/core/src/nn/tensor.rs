use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};

/// Scalar type the numeric core is generic over. Training runs in `f32`,
/// gradient verification in `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Debug
    + Default
    + Send
    + Sync
    + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to every Real")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// A `channels x time_steps` block of samples, stored channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap<T = f32> {
    channels: usize,
    time_steps: usize,
    data: Vec<T>,
}

impl<T: Real> FeatureMap<T> {
    pub fn new(channels: usize, time_steps: usize, data: Vec<T>) -> Result<Self> {
        if channels == 0 || time_steps == 0 {
            return Err(Error::shape(format!(
                "feature map needs at least one channel and one time step, got {channels}x{time_steps}"
            )));
        }
        if data.len() != channels * time_steps {
            return Err(Error::shape(format!(
                "feature map {channels}x{time_steps} needs {} samples, got {}",
                channels * time_steps,
                data.len()
            )));
        }
        Ok(Self {
            channels,
            time_steps,
            data,
        })
    }

    pub fn zeros(channels: usize, time_steps: usize) -> Self {
        assert!(channels > 0 && time_steps > 0, "empty feature map");
        Self {
            channels,
            time_steps,
            data: vec![T::zero(); channels * time_steps],
        }
    }

    /// Single-channel map from a waveform.
    pub fn from_waveform(samples: Vec<T>) -> Result<Self> {
        let n = samples.len();
        Self::new(1, n, samples)
    }

    pub fn from_channels(channels: &[&[T]]) -> Result<Self> {
        let time_steps = channels.first().map_or(0, |c| c.len());
        if channels.iter().any(|c| c.len() != time_steps) {
            return Err(Error::shape("channels of unequal length"));
        }
        let data = channels.iter().flat_map(|c| c.iter().copied()).collect();
        Self::new(channels.len(), time_steps, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn time_steps(&self) -> usize {
        self.time_steps
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.channels, self.time_steps)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[T] {
        &self.data[c * self.time_steps..(c + 1) * self.time_steps]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [T] {
        &mut self.data[c * self.time_steps..(c + 1) * self.time_steps]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Time window `[offset, offset + len)` of every channel.
    pub fn crop(&self, offset: usize, len: usize) -> Result<Self> {
        if len == 0 || offset + len > self.time_steps {
            return Err(Error::shape(format!(
                "crop [{offset}, {}) outside {} time steps",
                offset + len,
                self.time_steps
            )));
        }
        let mut data = Vec::with_capacity(self.channels * len);
        for c in 0..self.channels {
            data.extend_from_slice(&self.channel(c)[offset..offset + len]);
        }
        Ok(Self {
            channels: self.channels,
            time_steps: len,
            data,
        })
    }

    /// Symmetric crop down to `len` time steps. The length difference must be even.
    pub fn center_crop(&self, len: usize) -> Result<Self> {
        if len > self.time_steps || (self.time_steps - len) % 2 != 0 {
            return Err(Error::shape(format!(
                "cannot center-crop {} time steps to {len}",
                self.time_steps
            )));
        }
        self.crop((self.time_steps - len) / 2, len)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!(
                "cannot add {:?} to {:?}",
                other.shape(),
                self.shape()
            )));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            channels: self.channels,
            time_steps: self.time_steps,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> FeatureMap<U> {
        FeatureMap {
            channels: self.channels,
            time_steps: self.time_steps,
            data: self
                .data
                .iter()
                .map(|&v| U::from_f64_lossy(v.to_f64_lossy()))
                .collect(),
        }
    }
}
