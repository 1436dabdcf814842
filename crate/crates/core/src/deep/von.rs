//! Variational Online Newton: the BLR for `q = N(m, diag(s)⁻¹)`.
//!
//! ```text
//! s ← (1 − ρ)s + ρ E_q[diag Ĥ(θ)]
//! m ← m − ρ E_q[∇̂ℓ̄(θ)] / s          (s already updated; no square root)
//! ```
//!
//! The update is parameterized so that RMSprop is a special case: swap the
//! Hessian for squared gradients, take a square root of the scale, evaluate at the
//! mean instead of sampling. [`von_step`] with those switches reproduces
//! [`rmsprop_step`](crate::deep::rmsprop_step) exactly.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::blr::RhoSchedule;
use crate::error::{Error, Result};
use crate::gaussian::rng_from_seed;
use crate::natgrad::{reparam_hessian_diag_estimate, LossModel};

/// Source of the per-sample curvature estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curvature {
    /// The loss's Hessian diagonal when provided, else the reparameterization estimate.
    Hessian,
    /// Always the reparameterization estimate `ĝ ⊙ s ⊙ (θ − m)`.
    Reparam,
    /// `ĝ²`, the RMSprop substitute.
    SquaredGradient,
}

/// How `E_q[·]` is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VonExpectation {
    /// `samples` Monte-Carlo draws from `q_t`.
    Sampled,
    /// Evaluate at the mean only (no sampling).
    AtMean,
    /// Closed-form Gaussian expectations from the loss.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VonConfig {
    pub schedule: RhoSchedule,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_expectation")]
    pub expectation: VonExpectation,
    #[serde(default = "default_curvature")]
    pub curvature: Curvature,
    /// Mean step size; defaults to `ρ_t`.
    #[serde(default)]
    pub lr: Option<f64>,
    #[serde(default)]
    pub sqrt_scale: bool,
    #[serde(default)]
    pub damping: f64,
    /// `s` at or below this value is reported as [`Error::LeftDomain`].
    #[serde(default)]
    pub min_precision: f64,
}

fn default_samples() -> usize {
    1
}

fn default_expectation() -> VonExpectation {
    VonExpectation::Sampled
}

fn default_curvature() -> Curvature {
    Curvature::Hessian
}

impl VonConfig {
    pub fn new(rho: f64, samples: usize, seed: u64) -> Self {
        Self {
            schedule: RhoSchedule::constant(rho),
            samples,
            seed,
            expectation: VonExpectation::Sampled,
            curvature: Curvature::Hessian,
            lr: None,
            sqrt_scale: false,
            damping: 0.0,
            min_precision: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.samples == 0 {
            return Err(Error::Config("VON needs at least one sample".into()));
        }
        if self.lr.is_some_and(|lr| !(lr > 0.0)) || !(self.damping >= 0.0) {
            return Err(Error::Config("VON needs lr > 0 and damping >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VonState {
    pub m: DVector<f64>,
    pub s: DVector<f64>,
    pub t: usize,
}

impl VonState {
    pub fn new(m: DVector<f64>, s: DVector<f64>) -> Result<Self> {
        if m.len() != s.len() {
            return Err(Error::Dimension { expected: m.len(), got: s.len() });
        }
        if s.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Domain("VON precision must be positive".into()));
        }
        Ok(Self { m, s, t: 0 })
    }
}

/// Averaged gradient and curvature estimates for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct VonEstimates {
    pub grad: DVector<f64>,
    pub hess_diag: DVector<f64>,
}

/// `E_q[∇̂ℓ̄]` and `E_q[diag Ĥ]` as configured.
pub fn von_estimates<L: LossModel + ?Sized>(
    state: &VonState,
    loss: &L,
    cfg: &VonConfig,
    batch: Option<&[usize]>,
) -> Result<VonEstimates> {
    let p = state.m.len();
    let grad_at = |theta: &DVector<f64>| match batch {
        Some(b) => loss.batch_gradient(theta, b),
        None => loss.gradient(theta),
    };
    let hess_at = |theta: &DVector<f64>| match batch {
        Some(b) => loss.batch_hessian_diag(theta, b),
        None => loss.hessian_diag(theta),
    };
    let curvature = |theta: &DVector<f64>, g: &DVector<f64>| -> DVector<f64> {
        match cfg.curvature {
            Curvature::SquaredGradient => g.map(|v| v * v),
            Curvature::Reparam => reparam_hessian_diag_estimate(&state.m, &state.s, theta, g),
            Curvature::Hessian => {
                hess_at(theta).unwrap_or_else(|| reparam_hessian_diag_estimate(&state.m, &state.s, theta, g))
            }
        }
    };
    match cfg.expectation {
        VonExpectation::Exact => {
            let cov = DMatrix::from_diagonal(&state.s.map(|v| 1.0 / v));
            let e = loss.gaussian_expectations(&state.m, &cov).ok_or(Error::NoExactExpectation)?;
            Ok(VonEstimates { grad: e.gradient, hess_diag: e.hessian.diagonal() })
        }
        VonExpectation::AtMean => {
            let g = grad_at(&state.m);
            let h = curvature(&state.m, &g);
            Ok(VonEstimates { grad: g, hess_diag: h })
        }
        VonExpectation::Sampled => {
            let mut rng = rng_from_seed(cfg.seed, state.t as u64);
            let mut g_sum = DVector::zeros(p);
            let mut h_sum = DVector::zeros(p);
            for _ in 0..cfg.samples {
                let theta =
                    DVector::from_fn(p, |i, _| state.m[i] + rng.sample::<f64, _>(StandardNormal) / state.s[i].sqrt());
                let g = grad_at(&theta);
                h_sum += curvature(&theta, &g);
                g_sum += g;
            }
            let k = cfg.samples as f64;
            Ok(VonEstimates { grad: g_sum / k, hess_diag: h_sum / k })
        }
    }
}

/// Applies one VON update from given estimates.
pub fn von_update(state: &VonState, est: &VonEstimates, cfg: &VonConfig) -> Result<VonState> {
    let rho = cfg.schedule.at(state.t);
    let lr = cfg.lr.unwrap_or(rho);
    let t = state.t + 1;
    let s = state.s.zip_map(&est.hess_diag, |s, h| (1.0 - rho) * s + rho * h);
    if let Some((i, v)) = s.iter().enumerate().find(|(_, v)| !(**v > cfg.min_precision)) {
        return Err(Error::LeftDomain {
            iteration: t,
            reason: format!("precision s[{i}] = {v:e} not above {:e}", cfg.min_precision),
        });
    }
    let denom = if cfg.sqrt_scale { s.map(|v| v.sqrt() + cfg.damping) } else { s.map(|v| v + cfg.damping) };
    let m = DVector::from_fn(state.m.len(), |i, _| state.m[i] - lr * est.grad[i] / denom[i]);
    Ok(VonState { m, s, t })
}

pub fn von_step<L: LossModel + ?Sized>(
    state: &VonState,
    loss: &L,
    cfg: &VonConfig,
    batch: Option<&[usize]>,
) -> Result<VonState> {
    let est = von_estimates(state, loss, cfg, batch)?;
    von_update(state, &est, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::QuadraticLoss;

    #[test]
    fn exact_full_step_jumps_to_minimum() {
        let a = DVector::from_vec(vec![2.0, 0.5, 4.0]);
        let b = DVector::from_vec(vec![1.0, -1.0, 2.0]);
        let q = QuadraticLoss::diagonal(a.clone(), b.clone());
        let mut cfg = VonConfig::new(1.0, 1, 0);
        cfg.expectation = VonExpectation::Exact;
        let s0 = VonState::new(DVector::from_vec(vec![3.0, 3.0, -3.0]), DVector::from_element(3, 0.1)).unwrap();
        let next = von_step(&s0, &q, &cfg, None).unwrap();
        assert_eq!(next.s, a);
        let target = b.component_div(&a);
        assert!((next.m - target).amax() < 1e-12);
    }

    #[test]
    fn zero_loss_decays_precision_until_floor() {
        let q = QuadraticLoss::diagonal(DVector::zeros(2), DVector::zeros(2));
        let mut cfg = VonConfig::new(0.5, 2, 1);
        cfg.min_precision = 1e-3;
        let mut s = VonState::new(DVector::from_vec(vec![1.0, 2.0]), DVector::from_element(2, 1.0)).unwrap();
        let mut crossed = None;
        for _ in 0..20 {
            match von_step(&s, &q, &cfg, None) {
                Ok(next) => {
                    assert_eq!(next.m, s.m);
                    assert!(next.s[0] < s.s[0]);
                    s = next;
                }
                Err(Error::LeftDomain { iteration, .. }) => {
                    crossed = Some(iteration);
                    break;
                }
                Err(e) => panic!("{e}"),
            }
        }
        // 0.5^10 ≈ 9.8e-4 is the first value under the floor.
        assert_eq!(crossed, Some(10));
    }

    #[test]
    fn mean_step_has_no_square_root() {
        let cfg = VonConfig::new(0.5, 1, 0);
        let state = VonState::new(DVector::zeros(1), DVector::from_element(1, 1.0)).unwrap();
        let step = |h: f64| {
            let est = VonEstimates { grad: DVector::from_element(1, 1.0), hess_diag: DVector::from_element(1, h) };
            -von_update(&state, &est, &cfg).unwrap().m[0]
        };
        // s' = 0.5 + 0.5h: h = 1 gives s' = 1, h = 7 gives s' = 4.
        assert!((step(1.0) / step(7.0) - 4.0).abs() < 1e-15);
    }
}
