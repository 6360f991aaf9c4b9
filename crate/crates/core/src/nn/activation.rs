use super::tensor::{FeatureMap, Real};
use crate::error::{Error, Result};

fn sigmoid<T: Real>(x: T) -> T {
    // split on sign so exp never overflows
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn split_channels<T: Real>(pre: &FeatureMap<T>) -> Result<usize> {
    if pre.channels() % 2 != 0 {
        return Err(Error::config(format!(
            "gated unit needs an even channel count, got {}",
            pre.channels()
        )));
    }
    Ok(pre.channels() / 2)
}

/// `tanh(filter) * sigmoid(gate)`, where the first half of the channels is the
/// filter branch and the second half the gate branch.
pub fn gated_unit<T: Real>(pre: &FeatureMap<T>) -> Result<FeatureMap<T>> {
    let k = split_channels(pre)?;
    let mut out = FeatureMap::zeros(k, pre.time_steps());
    for c in 0..k {
        let (f, g) = (pre.channel(c), pre.channel(c + k));
        for ((o, &fv), &gv) in out.channel_mut(c).iter_mut().zip(f).zip(g) {
            *o = fv.tanh() * sigmoid(gv);
        }
    }
    Ok(out)
}

pub fn gated_unit_backward<T: Real>(
    pre: &FeatureMap<T>,
    grad_out: &FeatureMap<T>,
) -> Result<FeatureMap<T>> {
    let k = split_channels(pre)?;
    if grad_out.shape() != (k, pre.time_steps()) {
        return Err(Error::Internal("gated unit gradient shape mismatch".into()));
    }
    let mut grad = FeatureMap::zeros(pre.channels(), pre.time_steps());
    for c in 0..k {
        let g = grad_out.channel(c);
        let mut df = Vec::with_capacity(pre.time_steps());
        let mut dg = Vec::with_capacity(pre.time_steps());
        for ((&fv, &gv), &go) in pre.channel(c).iter().zip(pre.channel(c + k)).zip(g) {
            let t = fv.tanh();
            let s = sigmoid(gv);
            df.push(go * s * (T::one() - t * t));
            dg.push(go * t * s * (T::one() - s));
        }
        grad.channel_mut(c).copy_from_slice(&df);
        grad.channel_mut(c + k).copy_from_slice(&dg);
    }
    Ok(grad)
}

pub fn relu<T: Real>(x: &FeatureMap<T>) -> FeatureMap<T> {
    x.map(|v| v.max(T::zero()))
}

/// Subgradient at zero is 0.
pub fn relu_backward<T: Real>(x: &FeatureMap<T>, grad_out: &FeatureMap<T>) -> FeatureMap<T> {
    let data = x
        .as_slice()
        .iter()
        .zip(grad_out.as_slice())
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect();
    FeatureMap::new(x.channels(), x.time_steps(), data).expect("shape preserved")
}
