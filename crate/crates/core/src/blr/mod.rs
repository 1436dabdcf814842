//! The Bayesian learning rule: `λ_{t+1} = (1 − ρ_t) λ_t + ρ_t λ̃_t`, with
//! `λ̃_t = ∇_μ E_{q_t}[−ℓ̄]`.
//!
//! [`blr_step`] performs one update and reports [`Error::LeftDomain`] when the
//! convex combination is not a valid natural parameter. Retrying with a smaller
//! step is a caller policy; see [`crate::harness::run_blr`].

mod checks;
mod conjugate;

pub use checks::{
    fixed_point_residual, mirror_descent_step_numeric, multiplicative_form_check, multiplicative_form_spread,
    newton_recovery_step, vb_objective, vb_objective_dual_gradient, MultiplicativeReport, ResidualReport,
    MULTIPLICATIVE_TOL,
};
pub use conjugate::{conjugate_posterior, ConjugateModel};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expfam::{ExpectationParams, ExponentialFamily, NaturalParams};
use crate::gaussian::GaussianFamily;
use crate::natgrad::{Estimator, ExpectationMethod, LossModel};

/// Learning-rate schedule; every value must lie in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum RhoSchedule {
    Constant {
        rho: f64,
    },
    /// `ρ_t = rho0 / (1 + decay · t)`.
    InverseDecay {
        rho0: f64,
        decay: f64,
    },
    /// Explicit values; the last one repeats.
    Sequence {
        values: Vec<f64>,
    },
}

impl RhoSchedule {
    pub fn constant(rho: f64) -> Self {
        RhoSchedule::Constant { rho }
    }

    pub fn at(&self, t: usize) -> f64 {
        match self {
            RhoSchedule::Constant { rho } => *rho,
            RhoSchedule::InverseDecay { rho0, decay } => rho0 / (1.0 + decay * t as f64),
            RhoSchedule::Sequence { values } => values[t.min(values.len() - 1)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |r: f64| r > 0.0 && r <= 1.0;
        let valid = match self {
            RhoSchedule::Constant { rho } => ok(*rho),
            RhoSchedule::InverseDecay { rho0, decay } => ok(*rho0) && *decay >= 0.0,
            RhoSchedule::Sequence { values } => !values.is_empty() && values.iter().all(|r| ok(*r)),
        };
        if valid {
            Ok(())
        } else {
            Err(Error::Config("learning rates must lie in (0, 1]".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlrConfig {
    pub schedule: RhoSchedule,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Stop when `‖λ_{t+1} − λ_t‖ / ‖λ_t‖` or the fixed-point residual drops below this
    /// (deterministic estimators only).
    #[serde(default = "default_tol")]
    pub tol: f64,
    pub estimator: Estimator,
    /// Records the VB objective after each step when set.
    #[serde(default)]
    pub objective: Option<ExpectationMethod>,
}

fn default_max_iters() -> usize {
    100
}

fn default_tol() -> f64 {
    1e-9
}

impl BlrConfig {
    pub fn new(schedule: RhoSchedule, estimator: Estimator) -> Self {
        Self { schedule, max_iters: default_max_iters(), tol: default_tol(), estimator, objective: None }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if let Estimator::Mc { samples: 0, .. } = self.estimator {
            return Err(Error::Config("Monte-Carlo estimator needs at least one sample".into()));
        }
        if let Estimator::Quadrature { nodes: 0 } = self.estimator {
            return Err(Error::Config("quadrature needs at least one node".into()));
        }
        Ok(())
    }
}

/// Optimizer iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct BlrState {
    pub t: usize,
    pub lambda: NaturalParams,
    pub mu: ExpectationParams,
    /// `λ̃` used to produce this iterate.
    pub last_tilde: Option<DVector<f64>>,
    pub objective_trace: Vec<f64>,
}

impl BlrState {
    pub fn new(family: GaussianFamily, lambda: NaturalParams) -> Result<Self> {
        let mu = family.natural_to_dual(&lambda)?;
        Ok(Self { t: 0, lambda, mu, last_tilde: None, objective_trace: Vec::new() })
    }

    /// Relative change `‖λ_self − λ_prev‖ / ‖λ_prev‖`.
    pub fn relative_change(&self, prev: &BlrState) -> f64 {
        (self.lambda.as_vector() - prev.lambda.as_vector()).norm() / prev.lambda.norm().max(f64::MIN_POSITIVE)
    }
}

/// The update arithmetic alone, with a given `λ̃` and `ρ`.
pub fn blr_update(family: GaussianFamily, state: &BlrState, tilde: &DVector<f64>, rho: f64) -> Result<BlrState> {
    family.check_dim(tilde)?;
    let next = state.lambda.as_vector() * (1.0 - rho) + tilde * rho;
    let t = state.t + 1;
    let left = |reason: String| Error::LeftDomain { iteration: t, reason };
    let lambda = NaturalParams::new(next).map_err(|e| left(e.to_string()))?;
    let mu = family.natural_to_dual(&lambda).map_err(|e| left(e.to_string()))?;
    Ok(BlrState { t, lambda, mu, last_tilde: Some(tilde.clone()), objective_trace: state.objective_trace.clone() })
}

/// One step with the configured estimator and `ρ_t` from the schedule.
pub fn blr_step<L: LossModel + ?Sized>(
    family: GaussianFamily,
    state: &BlrState,
    loss: &L,
    cfg: &BlrConfig,
) -> Result<BlrState> {
    blr_step_with_rho(family, state, loss, cfg, cfg.schedule.at(state.t))
}

/// As [`blr_step`] with an explicit `ρ` (used by step-shrinking policies).
pub fn blr_step_with_rho<L: LossModel + ?Sized>(
    family: GaussianFamily,
    state: &BlrState,
    loss: &L,
    cfg: &BlrConfig,
    rho: f64,
) -> Result<BlrState> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Config(format!("learning rate {rho} outside (0, 1]")));
    }
    let est = cfg.estimator.estimate(family, &state.lambda, loss, state.t as u64)?;
    let mut next = blr_update(family, state, &est.tilde_lambda, rho)?;
    if let Some(method) = cfg.objective {
        let obj = vb_objective(family, &next.lambda, loss, method)?;
        next.objective_trace.push(obj);
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::QuadraticLoss;
    use nalgebra::DMatrix;

    fn fam() -> GaussianFamily {
        GaussianFamily::Full(1)
    }

    fn prior_state() -> BlrState {
        BlrState::new(fam(), NaturalParams::from_slice(&[0.0, -0.5]).unwrap()).unwrap()
    }

    #[test]
    fn fixed_point_is_invariant() {
        let s = prior_state();
        for rho in [0.1, 0.5, 1.0] {
            let next = blr_update(fam(), &s, &s.lambda.clone().into_inner(), rho).unwrap();
            assert_eq!(next.lambda, s.lambda);
        }
    }

    #[test]
    fn half_step_is_midpoint() {
        let loss = QuadraticLoss::new(DMatrix::from_element(1, 1, 3.0), DVector::from_element(1, 2.0), 0.0);
        let cfg = BlrConfig::new(RhoSchedule::constant(0.5), Estimator::Exact);
        let s = prior_state();
        let next = blr_step(fam(), &s, &loss, &cfg).unwrap();
        let tilde = next.last_tilde.clone().unwrap();
        assert_eq!(tilde.as_slice(), &[2.0, -1.5]);
        for i in 0..2 {
            assert_eq!(next.lambda[i], 0.5 * s.lambda[i] + 0.5 * tilde[i]);
        }
        assert_eq!(next.t, 1);
    }

    #[test]
    fn leaving_domain_is_reported() {
        let s = prior_state();
        let bad = DVector::from_vec(vec![0.0, 3.0]);
        match blr_update(fam(), &s, &bad, 1.0) {
            Err(Error::LeftDomain { iteration: 1, .. }) => {}
            other => panic!("expected LeftDomain, got {other:?}"),
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(RhoSchedule::constant(0.0).validate().is_err());
        assert!(RhoSchedule::constant(1.5).validate().is_err());
        assert!(RhoSchedule::Sequence { values: vec![] }.validate().is_err());
        let s = RhoSchedule::Sequence { values: vec![1.0, 0.5] };
        assert_eq!(s.at(0), 1.0);
        assert_eq!(s.at(7), 0.5);
        assert_eq!(RhoSchedule::InverseDecay { rho0: 1.0, decay: 1.0 }.at(1), 0.5);
    }
}
