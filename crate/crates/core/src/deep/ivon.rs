//! Improved VON: single-sample VON with a reparameterization Hessian estimate and a
//! retraction term that keeps the precision positive.
//!
//! With posterior `q = N(m, diag(N_eff (h + δ₀))⁻¹)` and `ρ = 1 − β₂`:
//!
//! ```text
//! 1. θ ~ q,  ĝ = ∇̂ f(θ)                       (f: mean data loss on the minibatch)
//! 2. ĥ = ĝ ⊙ (θ − m) ⊙ N_eff (h + δ₀),   ḡ ← β₁ḡ + (1 − β₁)ĝ
//! 3. h ← (1 − ρ)h + ρĥ + ½ρ² (h − ĥ)² / (h + δ₀)
//! 4. m ← m − α (ḡ / (1 − β₁ᵗ) + δ₀ m) / (h + δ₀)
//! ```
//!
//! The prior precision δ₀ doubles as weight decay: the full objective is
//! `N_eff (f(θ) + ½δ₀‖θ‖²)`.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::rng_from_seed;
use crate::models::DataFit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IvonConfig {
    /// Mean step size α.
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    /// Hessian EMA rate; `ρ = 1 − β₂`.
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    /// Effective sample size `N_eff`.
    pub ess: f64,
    /// Prior precision / weight decay δ₀.
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    /// Initial Hessian estimate `h₀`.
    #[serde(default = "default_hess_init")]
    pub hess_init: f64,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "default_true")]
    pub bias_correction: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.99999
}
fn default_weight_decay() -> f64 {
    1e-4
}
fn default_hess_init() -> f64 {
    0.1
}
fn default_mc_samples() -> usize {
    1
}
fn default_true() -> bool {
    true
}

impl IvonConfig {
    pub fn new(lr: f64, ess: f64) -> Self {
        Self {
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
            ess,
            weight_decay: default_weight_decay(),
            hess_init: default_hess_init(),
            mc_samples: 1,
            bias_correction: true,
            seed: 0,
        }
    }

    pub fn rho(&self) -> f64 {
        1.0 - self.beta2
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |b: f64| (0.0..1.0).contains(&b);
        if !(self.lr > 0.0)
            || !unit(self.beta1)
            || !unit(self.beta2)
            || !(self.ess > 0.0)
            || !(self.weight_decay >= 0.0)
            || self.mc_samples == 0
        {
            return Err(Error::Config(
                "ivon needs lr > 0, betas in [0, 1), ess > 0, weight_decay >= 0, mc_samples >= 1".into(),
            ));
        }
        if !(self.hess_init + self.weight_decay > 0.0) {
            return Err(Error::Config("ivon needs hess_init + weight_decay > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvonState {
    pub m: DVector<f64>,
    pub h: DVector<f64>,
    /// Gradient momentum ḡ.
    pub g: DVector<f64>,
    pub t: usize,
}

impl IvonState {
    pub fn new(m: DVector<f64>, cfg: &IvonConfig) -> Self {
        let p = m.len();
        Self { m, h: DVector::from_element(p, cfg.hess_init), g: DVector::zeros(p), t: 0 }
    }

    /// Posterior precision `N_eff (h + δ₀)`.
    pub fn precision(&self, cfg: &IvonConfig) -> DVector<f64> {
        self.h.map(|h| cfg.ess * (h + cfg.weight_decay))
    }

    /// `min(h + δ₀)`.
    pub fn min_shifted_hessian(&self, cfg: &IvonConfig) -> f64 {
        self.h.iter().map(|h| h + cfg.weight_decay).fold(f64::INFINITY, f64::min)
    }

    /// One draw `θ ~ N(m, 1/(N_eff (h + δ₀)))`.
    pub fn sample<R: Rng + ?Sized>(&self, cfg: &IvonConfig, rng: &mut R) -> DVector<f64> {
        let prec = self.precision(cfg);
        DVector::from_fn(self.m.len(), |i, _| self.m[i] + rng.sample::<f64, _>(StandardNormal) / prec[i].sqrt())
    }
}

/// `ĥ = ĝ ⊙ (θ − m) ⊙ N_eff (h + δ₀)`.
pub fn ivon_hessian_estimate(
    state: &IvonState,
    cfg: &IvonConfig,
    theta: &DVector<f64>,
    grad: &DVector<f64>,
) -> DVector<f64> {
    let prec = state.precision(cfg);
    DVector::from_fn(state.m.len(), |i, _| grad[i] * (theta[i] - state.m[i]) * prec[i])
}

/// Curvature, momentum and mean updates given the drawn samples and their minibatch gradients.
pub fn ivon_update(state: &IvonState, draws: &[(DVector<f64>, DVector<f64>)], cfg: &IvonConfig) -> Result<IvonState> {
    assert!(!draws.is_empty(), "at least one draw");
    let p = state.m.len();
    let k = draws.len() as f64;
    let mut g_hat = DVector::zeros(p);
    let mut h_hat = DVector::zeros(p);
    for (theta, grad) in draws {
        h_hat += ivon_hessian_estimate(state, cfg, theta, grad);
        g_hat += grad;
    }
    g_hat /= k;
    h_hat /= k;

    let t = state.t + 1;
    let b1 = cfg.beta1;
    let g = state.g.zip_map(&g_hat, |g, gh| b1 * g + (1.0 - b1) * gh);

    let rho = cfg.rho();
    let d0 = cfg.weight_decay;
    let h = DVector::from_fn(p, |i, _| {
        let (h, hh) = (state.h[i], h_hat[i]);
        (1.0 - rho) * h + rho * hh + 0.5 * rho * rho * (h - hh) * (h - hh) / (h + d0)
    });
    if let Some((i, v)) = h.iter().enumerate().find(|(_, v)| !(**v + d0 > 0.0)) {
        return Err(Error::LeftDomain { iteration: t, reason: format!("h[{i}] + δ₀ = {:e}", v + d0) });
    }

    let correction = if cfg.bias_correction { 1.0 - b1.powi(t as i32) } else { 1.0 };
    let m = DVector::from_fn(p, |i, _| {
        let g_bar = g[i] / correction;
        state.m[i] - cfg.lr * (g_bar + d0 * state.m[i]) / (h[i] + d0)
    });
    Ok(IvonState { m, h, g, t })
}

/// One IVON step on `fit`, drawing from stream `t` of the configured seed.
pub fn ivon_step<D: DataFit + ?Sized>(
    state: &IvonState,
    fit: &D,
    batch: &[usize],
    cfg: &IvonConfig,
) -> Result<IvonState> {
    let mut rng = rng_from_seed(cfg.seed, state.t as u64);
    let draws: Vec<_> = (0..cfg.mc_samples)
        .map(|_| {
            let theta = state.sample(cfg, &mut rng);
            let grad = fit.batch_gradient(&theta, batch);
            (theta, grad)
        })
        .collect();
    ivon_update(state, &draws, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> IvonConfig {
        IvonConfig { beta2: 0.9, weight_decay: 0.5, ..IvonConfig::new(0.1, 10.0) }
    }

    #[test]
    fn zero_signal_step() {
        let c = cfg();
        let state =
            IvonState { m: DVector::zeros(2), h: DVector::from_vec(vec![2.0, 0.3]), g: DVector::zeros(2), t: 0 };
        let draws = vec![(state.m.clone(), DVector::zeros(2))];
        let next = ivon_update(&state, &draws, &c).unwrap();
        let rho = c.rho();
        for i in 0..2 {
            let h = state.h[i];
            let expected = (1.0 - rho) * h + 0.5 * rho * rho * h * h / (h + 0.5);
            assert!((next.h[i] - expected).abs() < 1e-15);
        }
        assert_eq!(next.m, state.m);
    }

    #[test]
    fn retraction_vanishes_at_fixed_point() {
        let c = cfg();
        let state =
            IvonState { m: DVector::from_vec(vec![1.0]), h: DVector::from_vec(vec![0.7]), g: DVector::zeros(1), t: 0 };
        // Choose ĝ so that ĥ = h exactly: ĝ (θ − m) N(h + δ₀) = h.
        let theta = DVector::from_vec(vec![1.5]);
        let prec = 10.0 * (0.7 + 0.5);
        let grad = DVector::from_vec(vec![0.7 / (0.5 * prec)]);
        assert!((ivon_hessian_estimate(&state, &c, &theta, &grad)[0] - 0.7).abs() < 1e-15);
        let next = ivon_update(&state, &[(theta, grad)], &c).unwrap();
        // (1 − ρ)h + ρh = h with no retraction contribution.
        assert!((next.h[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn retraction_keeps_precision_positive_under_large_negative_estimates() {
        let c = IvonConfig { beta2: 0.0, weight_decay: 1e-3, ..IvonConfig::new(0.1, 1.0) };
        let state = IvonState { m: DVector::zeros(1), h: DVector::from_vec(vec![0.01]), g: DVector::zeros(1), t: 0 };
        let theta = DVector::from_vec(vec![1.0]);
        let grad = DVector::from_vec(vec![-1e6]);
        let next = ivon_update(&state, &[(theta, grad)], &c).unwrap();
        assert!(next.min_shifted_hessian(&c) > 0.0);
    }

    #[test]
    fn mean_update_scales_inversely_with_curvature() {
        let c = IvonConfig {
            beta1: 0.0,
            beta2: 0.5,
            weight_decay: 0.0,
            bias_correction: false,
            ..IvonConfig::new(1.0, 1.0)
        };
        let step = |h: f64| {
            let state = IvonState { m: DVector::zeros(1), h: DVector::from_vec(vec![h]), g: DVector::zeros(1), t: 0 };
            // θ = m keeps ĥ = 0; with ρ = ½ the new h is ½h + h/8 = 5h/8.
            let next = ivon_update(&state, &[(DVector::zeros(1), DVector::from_vec(vec![1.0]))], &c).unwrap();
            -next.m[0]
        };
        assert!((step(1.0) / step(4.0) - 4.0).abs() < 1e-12);
    }
}
