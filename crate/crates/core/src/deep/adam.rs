use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard bias-corrected Adam:
///
/// ```text
/// m ← β₁m + (1 − β₁)g        v ← β₂v + (1 − β₂)g²
/// m̂ = m / (1 − β₁ᵗ)          v̂ = v / (1 − β₂ᵗ)
/// θ ← θ − α m̂ / (√v̂ + ε)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |b: f64| (0.0..1.0).contains(&b);
        if !(self.lr > 0.0) || !unit(self.beta1) || !unit(self.beta2) || !(self.eps >= 0.0) {
            return Err(Error::Config("adam needs lr > 0, betas in [0, 1), eps >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub theta: DVector<f64>,
    pub m: DVector<f64>,
    pub v: DVector<f64>,
    pub t: usize,
}

impl AdamState {
    pub fn new(theta: DVector<f64>) -> Self {
        let n = theta.len();
        Self { theta, m: DVector::zeros(n), v: DVector::zeros(n), t: 0 }
    }
}

pub fn adam_step(state: &AdamState, grad: &DVector<f64>, cfg: &AdamConfig) -> AdamState {
    let t = state.t + 1;
    let m = state.m.zip_map(grad, |m, g| cfg.beta1 * m + (1.0 - cfg.beta1) * g);
    let v = state.v.zip_map(grad, |v, g| cfg.beta2 * v + (1.0 - cfg.beta2) * g * g);
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    let theta = DVector::from_fn(state.theta.len(), |i, _| {
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        state.theta[i] - cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps)
    });
    AdamState { theta, m, v, t }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_does_not_move() {
        let s = AdamState::new(DVector::from_vec(vec![0.3, -1.0]));
        let next = adam_step(&s, &DVector::zeros(2), &AdamConfig::default());
        assert_eq!(next.theta, s.theta);
    }

    #[test]
    fn constant_gradient_moves_by_lr_times_sign() {
        let cfg = AdamConfig { lr: 0.01, beta1: 0.9, beta2: 0.999, eps: 0.0 };
        let g = DVector::from_vec(vec![250.0, -0.003]);
        let mut s = AdamState::new(DVector::zeros(2));
        for _ in 0..5 {
            let next = adam_step(&s, &g, &cfg);
            let step = &next.theta - &s.theta;
            assert!((step[0] + 0.01).abs() < 1e-12);
            assert!((step[1] - 0.01).abs() < 1e-12);
            s = next;
        }
    }
}
