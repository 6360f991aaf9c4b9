//! Central-difference verification of analytic gradients, in 64-bit.

use super::conv::ConvParams;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Worst relative error over all checked parameters.
    pub max_relative_error: f64,
    /// Flat index (kernel order, weights before biases) of the worst parameter.
    pub worst_index: usize,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-12);
    (analytic - numeric).abs() / denom
}

/// Compares the analytic gradient of `loss` against central differences with
/// step `h`, perturbing each parameter of `kernels` in turn.
///
/// `loss` returns the scalar value and the analytic kernel gradients at the
/// given parameters. When `max_params` is set, only every n-th parameter is
/// perturbed so that at most that many are checked.
pub fn grad_check<F>(
    kernels: &[ConvParams<f64>],
    mut loss: F,
    h: f64,
    max_params: Option<usize>,
) -> Result<GradCheckReport>
where
    F: FnMut(&[ConvParams<f64>]) -> Result<(f64, Vec<ConvParams<f64>>)>,
{
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::config(format!("perturbation {h} outside [1e-7, 1e-3]")));
    }
    let (value, analytic) = loss(kernels)?;
    if !value.is_finite() {
        return Err(Error::config("loss is not finite at the check point"));
    }
    let flat_analytic: Vec<f64> = analytic.iter().flat_map(|k| k.values().copied()).collect();
    let total = flat_analytic.len();
    let stride = max_params.map_or(1, |m| total.div_ceil(m.max(1)).max(1));

    let mut work = kernels.to_vec();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_index: 0,
        checked: 0,
    };
    let mut flat = 0usize;
    for k in 0..work.len() {
        let n = work[k].param_count();
        for local in 0..n {
            if flat % stride == 0 {
                let original = get(&work[k], local);
                set(&mut work[k], local, original + h);
                let plus = loss(&work)?.0;
                set(&mut work[k], local, original - h);
                let minus = loss(&work)?.0;
                set(&mut work[k], local, original);

                let numeric = (plus - minus) / (2.0 * h);
                let err = relative_error(flat_analytic[flat], numeric);
                if err > report.max_relative_error || err.is_nan() {
                    report.max_relative_error = err;
                    report.worst_index = flat;
                }
                report.checked += 1;
            }
            flat += 1;
        }
    }
    Ok(report)
}

fn get(k: &ConvParams<f64>, local: usize) -> f64 {
    let nw = k.weights.len();
    if local < nw {
        k.weights[local]
    } else {
        k.bias[local - nw]
    }
}

fn set(k: &mut ConvParams<f64>, local: usize, v: f64) {
    let nw = k.weights.len();
    if local < nw {
        k.weights[local] = v;
    } else {
        k.bias[local - nw] = v;
    }
}
