//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! "WSSM" | u32 version | u32 config_len | config JSON (UTF-8)
//! u64 param_count | param_count x f32            (declared kernel order)
//! u64 adam_step | f64 lr | f64 beta1 | f64 beta2 | f64 epsilon
//! u64 moment_count | moment_count x f32 (first) | moment_count x f32 (second)
//! u32 history_len | history_len x (f64 train, f64 validation)
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::atomic_write;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::nn::{AdamConfig, AdamState};

pub const MAGIC: &[u8; 4] = b"WSSM";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub train: f64,
    pub validation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: Vec<f32>,
    pub optimizer: AdamState,
    pub history: Vec<EpochLosses>,
}

impl Checkpoint {
    pub fn new(model: &Model<f32>, optimizer: AdamState, history: Vec<EpochLosses>) -> Self {
        Self {
            config: model.config().clone(),
            params: model.flat_params(),
            optimizer,
            history,
        }
    }

    pub fn model(&self) -> Result<Model<f32>> {
        Model::from_flat(self.config.clone(), &self.params)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let config = serde_json::to_vec(&self.config)
            .map_err(|e| Error::Internal(format!("config serialisation failed: {e}")))?;
        let mut out = Vec::with_capacity(64 + config.len() + 12 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(config.len() as u32).to_le_bytes());
        out.extend_from_slice(&config);
        put_f32s(&mut out, &self.params);

        let opt = &self.optimizer;
        out.extend_from_slice(&opt.step_count.to_le_bytes());
        for v in [opt.config.lr, opt.config.beta1, opt.config.beta2, opt.config.epsilon] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(opt.first_moment.len() as u64).to_le_bytes());
        for v in opt.first_moment.iter().chain(&opt.second_moment) {
            out.extend_from_slice(&v.to_le_bytes());
        }

        let history_len =
            u32::try_from(self.history.len()).map_err(|_| Error::Internal("history too long".into()))?;
        out.extend_from_slice(&history_len.to_le_bytes());
        for e in &self.history {
            out.extend_from_slice(&e.train.to_le_bytes());
            out.extend_from_slice(&e.validation.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::integrity(0, "bad magic, not a checkpoint"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::integrity(4, format!("unsupported checkpoint version {version}")));
        }
        let config_len = r.u32()? as usize;
        let config_at = r.pos;
        let config: ModelConfig = serde_json::from_slice(r.take(config_len)?)
            .map_err(|e| Error::integrity(config_at as u64, format!("invalid configuration JSON: {e}")))?;
        config
            .validate()
            .map_err(|e| Error::integrity(config_at as u64, e.to_string()))?;

        let count_at = r.pos;
        let count = r.u64()?;
        if count != config.parameter_count() as u64 {
            return Err(Error::integrity(
                count_at as u64,
                format!(
                    "parameter blob holds {count} values, configuration needs {}",
                    config.parameter_count()
                ),
            ));
        }
        let params = r.f32s(count as usize)?;

        let step_count = r.u64()?;
        let adam = AdamConfig {
            lr: r.f64()?,
            beta1: r.f64()?,
            beta2: r.f64()?,
            epsilon: r.f64()?,
        };
        let moments_at = r.pos;
        let moments = r.u64()?;
        if moments != count {
            return Err(Error::integrity(
                moments_at as u64,
                format!("optimizer tracks {moments} values, model has {count}"),
            ));
        }
        let first_moment = r.f32s(count as usize)?;
        let second_moment = r.f32s(count as usize)?;
        adam.validate()
            .map_err(|e| Error::integrity(moments_at as u64, e.to_string()))?;

        let history_len = r.u32()? as usize;
        let mut history = Vec::with_capacity(history_len.min(1 << 16));
        for _ in 0..history_len {
            history.push(EpochLosses {
                train: r.f64()?,
                validation: r.f64()?,
            });
        }
        if r.pos != bytes.len() {
            return Err(Error::integrity(
                r.pos as u64,
                format!("{} trailing bytes after the history", bytes.len() - r.pos),
            ));
        }
        Ok(Self {
            config,
            params,
            optimizer: AdamState {
                config: adam,
                step_count,
                first_moment,
                second_moment,
            },
            history,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        atomic_write(path.as_ref(), &self.to_bytes()?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Loads a checkpoint and requires its configuration to equal `expected`.
    pub fn load_for(path: impl AsRef<Path>, expected: &ModelConfig) -> Result<Self> {
        let ckpt = Self::load(path)?;
        if &ckpt.config != expected {
            return Err(Error::config(format!(
                "checkpoint configuration {:?} does not match {:?}",
                ckpt.config, expected
            )));
        }
        Ok(ckpt)
    }
}

fn put_f32s(out: &mut Vec<u8>, values: &[f32]) {
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::integrity(
                    self.pos as u64,
                    format!("truncated: need {n} bytes, {} remain", self.bytes.len() - self.pos),
                )
            })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let at = self.pos;
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::integrity(at as u64, "length overflow"))?)?;
        let values: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::integrity((at + 4 * i) as u64, "non-finite value in blob"));
        }
        Ok(values)
    }
}
