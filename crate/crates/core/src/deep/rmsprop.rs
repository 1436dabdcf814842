use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmspropConfig {
    /// Step size α.
    pub lr: f64,
    /// Scale-EMA rate β; `v ← (1 − β)v + βg²`.
    pub beta: f64,
    /// Damping `c` added to `√v`.
    pub damping: f64,
}

impl Default for RmspropConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta: 0.01, damping: 1e-8 }
    }
}

impl RmspropConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !(self.beta > 0.0 && self.beta <= 1.0) || !(self.damping >= 0.0) {
            return Err(Error::Config("rmsprop needs lr > 0, beta in (0, 1], damping >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmspropState {
    pub theta: DVector<f64>,
    pub v: DVector<f64>,
    pub t: usize,
}

impl RmspropState {
    pub fn new(theta: DVector<f64>) -> Self {
        let v = DVector::zeros(theta.len());
        Self { theta, v, t: 0 }
    }
}

/// `v ← (1 − β)v + βg²`, then `θ ← θ − α g / (√v + c)`.
pub fn rmsprop_step(state: &RmspropState, grad: &DVector<f64>, cfg: &RmspropConfig) -> RmspropState {
    let beta = cfg.beta;
    let v = state.v.zip_map(grad, |v, g| (1.0 - beta) * v + beta * (g * g));
    let denom = v.map(|v| v.sqrt() + cfg.damping);
    let theta = DVector::from_fn(state.theta.len(), |i, _| state.theta[i] - cfg.lr * grad[i] / denom[i]);
    RmspropState { theta, v, t: state.t + 1 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_only_decays_scale() {
        let s = RmspropState { theta: DVector::from_vec(vec![1.0, -2.0]), v: DVector::from_vec(vec![4.0, 1.0]), t: 0 };
        let cfg = RmspropConfig { lr: 0.1, beta: 0.25, damping: 1e-8 };
        let next = rmsprop_step(&s, &DVector::zeros(2), &cfg);
        assert_eq!(next.theta, s.theta);
        assert_eq!(next.v.as_slice(), &[3.0, 0.75]);
    }

    #[test]
    fn constant_gradient_is_ema_fixed_point() {
        let g = DVector::from_vec(vec![3.0, -0.5]);
        let s = RmspropState { theta: DVector::zeros(2), v: g.map(|x| x * x), t: 0 };
        let cfg = RmspropConfig { lr: 0.2, beta: 0.37, damping: 1e-3 };
        let next = rmsprop_step(&s, &g, &cfg);
        assert_eq!(next.v, s.v);
        for i in 0..2 {
            let expected = -0.2 * g[i] / (g[i].abs() + 1e-3);
            assert!((next.theta[i] - expected).abs() < 1e-15);
        }
    }
}
