use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{FeatureMap, Real};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Sum,
    Mean,
}

impl std::str::FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Reduction::Sum),
            "mean" => Ok(Reduction::Mean),
            other => Err(Error::config(format!("unknown reduction `{other}` (expected sum or mean)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Weight of the dissimilarity term.
    pub alpha: f64,
    pub reduction: Reduction,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            reduction: Reduction::Sum,
        }
    }
}

impl LossConfig {
    pub fn validate(&self, num_sources: usize) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if self.alpha > 0.0 && num_sources < 2 {
            return Err(Error::config(
                "the dissimilarity term needs at least two estimated sources",
            ));
        }
        Ok(())
    }
}

fn check_shapes<T: Real>(estimates: &FeatureMap<T>, references: &FeatureMap<T>) -> Result<()> {
    if estimates.shape() != references.shape() {
        return Err(Error::shape(format!(
            "estimates {:?} and references {:?} differ in shape",
            estimates.shape(),
            references.shape()
        )));
    }
    Ok(())
}

/// Sign with the subgradient at zero taken as zero.
fn sign<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Sum (or mean) over sources and samples of `|estimate - reference|`.
pub fn loss_mae<T: Real>(estimates: &FeatureMap<T>, references: &FeatureMap<T>, reduction: Reduction) -> Result<T> {
    check_shapes(estimates, references)?;
    let total: T = estimates
        .as_slice()
        .iter()
        .zip(references.as_slice())
        .map(|(&e, &r)| (e - r).abs())
        .sum();
    Ok(match reduction {
        Reduction::Sum => total,
        Reduction::Mean => total / T::from_f64_lossy(estimates.as_slice().len() as f64),
    })
}

/// Pairwise dissimilarity: `sum_j sum_{i != j} |estimate_j - reference_i|`.
pub fn loss_dissimilarity<T: Real>(
    estimates: &FeatureMap<T>,
    references: &FeatureMap<T>,
    reduction: Reduction,
) -> Result<T> {
    check_shapes(estimates, references)?;
    let n = estimates.channels();
    let mut total = T::zero();
    for j in 0..n {
        for i in (0..n).filter(|&i| i != j) {
            total += estimates
                .channel(j)
                .iter()
                .zip(references.channel(i))
                .map(|(&e, &r)| (e - r).abs())
                .sum::<T>();
        }
    }
    let terms = n * n.saturating_sub(1) * estimates.time_steps();
    Ok(match reduction {
        Reduction::Sum => total,
        Reduction::Mean if terms > 0 => total / T::from_f64_lossy(terms as f64),
        Reduction::Mean => T::zero(),
    })
}

/// `L_MAE - alpha * L_d`. With `alpha == 0` this is exactly [`loss_mae`].
pub fn loss_total<T: Real>(estimates: &FeatureMap<T>, references: &FeatureMap<T>, cfg: &LossConfig) -> Result<T> {
    cfg.validate(estimates.channels())?;
    let mae = loss_mae(estimates, references, cfg.reduction)?;
    if cfg.alpha == 0.0 {
        return Ok(mae);
    }
    let ld = loss_dissimilarity(estimates, references, cfg.reduction)?;
    Ok(mae - T::from_f64_lossy(cfg.alpha) * ld)
}

/// Value of [`loss_total`] together with its gradient with respect to the estimates.
pub fn loss_total_with_grad<T: Real>(
    estimates: &FeatureMap<T>,
    references: &FeatureMap<T>,
    cfg: &LossConfig,
) -> Result<(T, FeatureMap<T>)> {
    let value = loss_total(estimates, references, cfg)?;
    let n = estimates.channels();
    let len = estimates.time_steps();
    let mae_scale = match cfg.reduction {
        Reduction::Sum => T::one(),
        Reduction::Mean => T::one() / T::from_f64_lossy((n * len) as f64),
    };
    let mut grad = FeatureMap::zeros(n, len);
    for j in 0..n {
        let g = grad.channel_mut(j);
        for ((d, &e), &r) in g.iter_mut().zip(estimates.channel(j)).zip(references.channel(j)) {
            *d = mae_scale * sign(e - r);
        }
    }
    if cfg.alpha > 0.0 {
        let terms = n * (n - 1) * len;
        let ld_scale = T::from_f64_lossy(cfg.alpha)
            * match cfg.reduction {
                Reduction::Sum => T::one(),
                Reduction::Mean => T::one() / T::from_f64_lossy(terms as f64),
            };
        for j in 0..n {
            for i in (0..n).filter(|&i| i != j) {
                let refs = references.channel(i).to_vec();
                let est = estimates.channel(j).to_vec();
                for ((d, e), r) in grad.channel_mut(j).iter_mut().zip(est).zip(refs) {
                    *d -= ld_scale * sign(e - r);
                }
            }
        }
    }
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> (FeatureMap<f64>, FeatureMap<f64>) {
        // vocals est [0.5, 0], ref [1, 0]; drums est [0, 1], ref [0, 1]
        let est = FeatureMap::new(2, 2, vec![0.5, 0.0, 0.0, 1.0]).unwrap();
        let refs = FeatureMap::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        (est, refs)
    }

    #[test]
    fn mae_hand_values() {
        let (est, refs) = example();
        assert_eq!(loss_mae(&refs, &refs, Reduction::Sum).unwrap(), 0.0);
        assert_eq!(loss_mae(&est, &refs, Reduction::Sum).unwrap(), 0.5);
        assert_eq!(loss_mae(&est, &refs, Reduction::Mean).unwrap(), 0.125);
    }

    #[test]
    fn total_hand_value() {
        let (est, refs) = example();
        assert_eq!(loss_dissimilarity(&est, &refs, Reduction::Sum).unwrap(), 3.5);
        let cfg = LossConfig {
            alpha: 0.05,
            reduction: Reduction::Sum,
        };
        assert!((loss_total(&est, &refs, &cfg).unwrap() - 0.325).abs() < 1e-12);
    }

    #[test]
    fn alpha_zero_is_mae() {
        let (est, refs) = example();
        let total = loss_total(&est, &refs, &LossConfig::default()).unwrap();
        assert_eq!(total.to_bits(), loss_mae(&est, &refs, Reduction::Sum).unwrap().to_bits());
    }

    #[test]
    fn single_source_with_alpha_rejected() {
        let x = FeatureMap::<f64>::zeros(1, 4);
        let cfg = LossConfig {
            alpha: 0.05,
            reduction: Reduction::Sum,
        };
        assert!(matches!(loss_total(&x, &x, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn shape_mismatch() {
        let a = FeatureMap::<f64>::zeros(1, 4);
        let b = FeatureMap::<f64>::zeros(1, 5);
        assert!(matches!(loss_mae(&a, &b, Reduction::Sum), Err(Error::Shape(_))));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let est = FeatureMap::new(3, 4, (0..12).map(|i| (i as f64 * 0.71).sin()).collect()).unwrap();
        let refs = FeatureMap::new(3, 4, (0..12).map(|i| (i as f64 * 1.3).cos()).collect()).unwrap();
        for reduction in [Reduction::Sum, Reduction::Mean] {
            let cfg = LossConfig { alpha: 0.05, reduction };
            let (_, grad) = loss_total_with_grad(&est, &refs, &cfg).unwrap();
            for idx in 0..12 {
                let h = 1e-6;
                let mut plus = est.clone();
                plus.as_mut_slice()[idx] += h;
                let mut minus = est.clone();
                minus.as_mut_slice()[idx] -= h;
                let numeric = (loss_total(&plus, &refs, &cfg).unwrap() - loss_total(&minus, &refs, &cfg).unwrap()) / (2.0 * h);
                assert!((numeric - grad.as_slice()[idx]).abs() < 1e-8);
            }
        }
    }
}
