use serde::{Deserialize, Serialize};

use super::conv::ConvParams;
use super::tensor::Real;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid ADAM hyper-parameters {self:?}")))
        }
    }
}

/// Moment estimates for every parameter, flattened in kernel order
/// (each kernel's weights, then its biases).
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step_count: u64,
    pub first_moment: Vec<f32>,
    pub second_moment: Vec<f32>,
}

impl AdamState {
    pub fn new(config: AdamConfig, param_count: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            step_count: 0,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
        })
    }

    pub fn param_count(&self) -> usize {
        self.first_moment.len()
    }

    /// Bias-corrected ADAM update, in place. Nothing is modified when any
    /// gradient is non-finite.
    pub fn step<T: Real>(&mut self, params: &mut [ConvParams<T>], grads: &[ConvParams<T>]) -> Result<()> {
        self.config.validate()?;
        if params.len() != grads.len() || params.iter().zip(grads).any(|(p, g)| !p.same_shape(g)) {
            return Err(Error::shape("parameter and gradient kernels differ in shape"));
        }
        let total: usize = params.iter().map(ConvParams::param_count).sum();
        if total != self.param_count() {
            return Err(Error::shape(format!(
                "optimizer tracks {} parameters, model has {total}",
                self.param_count()
            )));
        }
        if grads.iter().flat_map(ConvParams::values).any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                step: self.step_count + 1,
                reason: "non-finite gradient".into(),
                last_good: None,
            });
        }

        self.step_count += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step_count as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);

        let moments = self.first_moment.iter_mut().zip(self.second_moment.iter_mut());
        let values = params
            .iter_mut()
            .zip(grads)
            .flat_map(|(p, g)| p.values_mut().zip(g.values()));
        for ((m, v), (p, &g)) in moments.zip(values) {
            let g = g.to_f64_lossy();
            let m_new = beta1 * f64::from(*m) + (1.0 - beta1) * g;
            let v_new = beta2 * f64::from(*v) + (1.0 - beta2) * g * g;
            *m = m_new as f32;
            *v = v_new as f32;
            let m_hat = m_new / bias1;
            let v_hat = v_new / bias2;
            let delta = lr * m_hat / (v_hat.sqrt() + epsilon);
            *p = T::from_f64_lossy(p.to_f64_lossy() - delta);
        }
        Ok(())
    }
}
