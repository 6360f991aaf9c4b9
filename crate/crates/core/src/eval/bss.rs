//! Whole-signal BSS Eval: an estimate is split into a target part, an
//! interference part, and an artifact part by least-squares projection onto
//! the span of delayed copies (lags `0..L`) of the references.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::cholesky::Cholesky;
use crate::error::{Error, Result};

/// Added to the Gram diagonal before factoring.
pub const GRAM_REGULARIZATION: f64 = 1e-10;
/// Squared sine of the smallest angle allowed between a reference and the
/// span of the preceding ones.
pub const INDEPENDENCE_TOLERANCE: f64 = 1e-10;
/// Ratios are clamped to `[-CLAMP_DB, CLAMP_DB]`.
pub const CLAMP_DB: f64 = 100.0;
pub const DEFAULT_FILTER_LENGTH: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub s_target: Vec<f64>,
    pub e_interf: Vec<f64>,
    pub e_artif: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sdr: f64,
    pub sir: f64,
    pub sar: f64,
}

struct Spectra {
    len: usize,
    fft_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Spectra {
    fn new(len: usize, filter_length: usize) -> Self {
        let fft_len = (len + filter_length).next_power_of_two();
        let mut planner = FftPlanner::new();
        Self {
            len,
            fft_len,
            forward: planner.plan_fft_forward(fft_len),
            inverse: planner.plan_fft_inverse(fft_len),
        }
    }

    fn transform(&self, x: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        buf.resize(self.fft_len, Complex::new(0.0, 0.0));
        self.forward.process(&mut buf);
        buf
    }

    fn inverse(&self, mut spec: Vec<Complex<f64>>) -> Vec<f64> {
        self.inverse.process(&mut spec);
        let scale = 1.0 / self.fft_len as f64;
        spec.into_iter().map(|c| c.re * scale).collect()
    }

    /// `out[d] = sum_u a[u + d] * b[u]`, for `d` mod `fft_len`.
    fn correlate(&self, a: &[Complex<f64>], b: &[Complex<f64>]) -> Vec<f64> {
        self.inverse(a.iter().zip(b).map(|(x, y)| x * y.conj()).collect())
    }
}

/// Gram factors for one set of references, reusable across estimates.
pub struct ReferenceSet {
    references: Vec<Vec<f64>>,
    filter_length: usize,
    spectra: Spectra,
    reference_spectra: Vec<Vec<Complex<f64>>>,
    all: Cholesky,
    per_source: Vec<Cholesky>,
}

/// Rejects references that are zero or lie (numerically) in the span of the
/// others. Rank loss among one reference's own delayed copies is left to the
/// Gram regularisation.
fn check_independent(references: &[Vec<f64>]) -> Result<()> {
    let n = references.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut lower = vec![0.0; n * n];
    for j in 0..n {
        let energy = dot(&references[j], &references[j]);
        let mut pivot = energy;
        for k in 0..j {
            pivot -= lower[j * n + k] * lower[j * n + k];
        }
        if !(pivot > INDEPENDENCE_TOLERANCE * energy) || energy == 0.0 {
            return Err(Error::DegenerateReference(format!(
                "reference {j} is zero or a linear combination of the others"
            )));
        }
        let d = pivot.sqrt();
        lower[j * n + j] = d;
        for i in j + 1..n {
            let mut s = dot(&references[i], &references[j]);
            for k in 0..j {
                s -= lower[i * n + k] * lower[j * n + k];
            }
            lower[i * n + j] = s / d;
        }
    }
    Ok(())
}

impl std::fmt::Debug for ReferenceSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReferenceSet")
            .field("sources", &self.references.len())
            .field("len", &self.len())
            .field("filter_length", &self.filter_length)
            .finish()
    }
}

impl ReferenceSet {
    pub fn new(references: Vec<Vec<f64>>, filter_length: usize) -> Result<Self> {
        let n = references.len();
        let len = references.first().map_or(0, Vec::len);
        if n == 0 || len == 0 {
            return Err(Error::shape("BSS Eval needs at least one non-empty reference"));
        }
        if references.iter().any(|r| r.len() != len) {
            return Err(Error::shape("references differ in length"));
        }
        if filter_length == 0 || filter_length > len {
            return Err(Error::config(format!(
                "filter length must be in [1, {len}], got {filter_length}"
            )));
        }
        if references.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::shape("references contain non-finite samples"));
        }
        check_independent(&references)?;
        let spectra = Spectra::new(len, filter_length);
        let reference_spectra: Vec<_> = references.iter().map(|r| spectra.transform(r)).collect();
        let l = filter_length;
        let dim = n * l;
        let mut gram = vec![0.0; dim * dim];
        for i in 0..n {
            for j in 0..=i {
                let corr = spectra.correlate(&reference_spectra[i], &reference_spectra[j]);
                fill_block(&mut gram, dim, &references[i], &references[j], i, j, l, &corr, spectra.fft_len);
            }
        }
        // mirror into the upper triangle so blocks can be sliced out
        for r in 0..dim {
            for c in r + 1..dim {
                gram[r * dim + c] = gram[c * dim + r];
            }
        }
        let per_source = (0..n)
            .map(|j| {
                let mut block = vec![0.0; l * l];
                for a in 0..l {
                    block[a * l..(a + 1) * l].copy_from_slice(&gram[(j * l + a) * dim + j * l..(j * l + a) * dim + (j + 1) * l]);
                }
                Cholesky::factor(block, l, GRAM_REGULARIZATION)
            })
            .collect::<Result<Vec<_>>>()?;
        let all = Cholesky::factor(gram, dim, GRAM_REGULARIZATION)?;
        Ok(Self {
            references,
            filter_length,
            spectra,
            reference_spectra,
            all,
            per_source,
        })
    }

    pub fn len(&self) -> usize {
        self.spectra.len
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.len == 0
    }

    pub fn num_sources(&self) -> usize {
        self.references.len()
    }

    /// Projects `estimate` onto delayed copies of the references listed in `sources`.
    fn project(&self, est_spectrum: &[Complex<f64>], sources: &[usize], chol: &Cholesky) -> Vec<f64> {
        let l = self.filter_length;
        let mut rhs = Vec::with_capacity(sources.len() * l);
        for &i in sources {
            let corr = self.spectra.correlate(est_spectrum, &self.reference_spectra[i]);
            rhs.extend_from_slice(&corr[..l]);
        }
        let coeffs = chol.solve(&rhs);
        let mut acc = vec![Complex::new(0.0, 0.0); self.spectra.fft_len];
        for (slot, &i) in sources.iter().enumerate() {
            let filter = self.spectra.transform(&coeffs[slot * l..(slot + 1) * l]);
            for ((a, s), f) in acc.iter_mut().zip(&self.reference_spectra[i]).zip(&filter) {
                *a += s * f;
            }
        }
        let mut out = self.spectra.inverse(acc);
        out.truncate(self.spectra.len);
        out
    }

    pub fn decompose(&self, estimate: &[f64], target: usize) -> Result<Decomposition> {
        if estimate.len() != self.len() {
            return Err(Error::shape(format!(
                "estimate has {} samples, references have {}",
                estimate.len(),
                self.len()
            )));
        }
        if target >= self.num_sources() {
            return Err(Error::config(format!(
                "target index {target} out of range for {} references",
                self.num_sources()
            )));
        }
        if estimate.iter().any(|v| !v.is_finite()) {
            return Err(Error::shape("estimate contains non-finite samples"));
        }
        let spec = self.spectra.transform(estimate);
        let s_target = self.project(&spec, &[target], &self.per_source[target]);
        let all: Vec<usize> = (0..self.num_sources()).collect();
        let p_all = self.project(&spec, &all, &self.all);
        let e_interf = p_all.iter().zip(&s_target).map(|(p, s)| p - s).collect();
        let e_artif = estimate.iter().zip(&p_all).map(|(e, p)| e - p).collect();
        Ok(Decomposition {
            s_target,
            e_interf,
            e_artif,
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn fill_block(
    gram: &mut [f64],
    dim: usize,
    si: &[f64],
    sj: &[f64],
    i: usize,
    j: usize,
    l: usize,
    corr: &[f64],
    fft_len: usize,
) {
    // entry (a, b) = sum_{t >= max(a, b)} si[t - a] * sj[t - b]; along a diagonal
    // b - a = d it starts from the full correlation at lag d and loses one tail
    // product per step.
    let len = si.len();
    for d in -(l as isize - 1)..=(l as isize - 1) {
        let mut value = corr[d.rem_euclid(fft_len as isize) as usize];
        let (mut a, mut b) = if d >= 0 { (0, d as usize) } else { ((-d) as usize, 0) };
        while a < l && b < l {
            gram[(i * l + a) * dim + j * l + b] = value;
            value -= si[len - 1 - a] * sj[len - 1 - b];
            a += 1;
            b += 1;
        }
    }
}

pub fn decompose(estimate: &[f64], references: &[Vec<f64>], target: usize, filter_length: usize) -> Result<Decomposition> {
    ReferenceSet::new(references.to_vec(), filter_length)?.decompose(estimate, target)
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn ratio_db(num: f64, den: f64, floor: f64) -> f64 {
    if num <= floor {
        -CLAMP_DB
    } else if den <= floor {
        CLAMP_DB
    } else {
        (10.0 * (num / den).log10()).clamp(-CLAMP_DB, CLAMP_DB)
    }
}

/// SDR, SIR, SAR in dB. Energies below `1e-20` of the estimate's energy
/// count as zero; a zero numerator gives -100 dB, a zero denominator +100 dB.
pub fn sdr_sir_sar(d: &Decomposition) -> Metrics {
    let estimate_energy: f64 = (0..d.s_target.len())
        .map(|t| {
            let v = d.s_target[t] + d.e_interf[t] + d.e_artif[t];
            v * v
        })
        .sum();
    let floor = 1e-20 * estimate_energy;
    let target = energy(&d.s_target);
    let interf = energy(&d.e_interf);
    let artif = energy(&d.e_artif);
    let distortion: Vec<f64> = d.e_interf.iter().zip(&d.e_artif).map(|(i, a)| i + a).collect();
    let signal: Vec<f64> = d.s_target.iter().zip(&d.e_interf).map(|(s, i)| s + i).collect();
    Metrics {
        sdr: ratio_db(target, energy(&distortion), floor),
        sir: ratio_db(target, interf, floor),
        sar: ratio_db(energy(&signal), artif, floor),
    }
}
