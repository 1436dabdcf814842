//! Equivalent views of a BLR step and the stationarity checks built on them.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::blr::BlrState;
use crate::error::{Error, Result};
use crate::expfam::{ExpectationParams, ExponentialFamily, NaturalParams};
use crate::gaussian::{rng_from_seed, GaussianFamily};
use crate::linalg::cholesky;
use crate::natgrad::{Estimator, ExpectationMethod, LossModel};

/// Largest allowed `max − min` of the multiplicative-form probe function.
pub const MULTIPLICATIVE_TOL: f64 = 1e-8;

const PROBE_SEED: u64 = 0x9E37_79B9;
const PROBE_COUNT: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicativeReport {
    /// `max − min` over the probe grid.
    pub spread: f64,
    pub passed: bool,
}

/// Spread over probe points of
/// `log q_{t+1}(θ) − [(1 − ρ) log q_t(θ) + ρ ⟨λ̃, T(θ)⟩]`, which is constant in θ
/// exactly when `λ_{t+1} = (1 − ρ)λ_t + ρλ̃`.
pub fn multiplicative_form_spread(
    family: GaussianFamily,
    lambda_t: &NaturalParams,
    lambda_t1: &NaturalParams,
    tilde: &DVector<f64>,
    rho: f64,
) -> Result<f64> {
    let mean = family.mean(lambda_t)?;
    let mut rng = rng_from_seed(PROBE_SEED, 0);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for _ in 0..PROBE_COUNT {
        let theta = &mean + DVector::from_fn(family.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let t = family.sufficient_stats(&theta);
        let v = family.log_density(lambda_t1, &theta)?
            - ((1.0 - rho) * family.log_density(lambda_t, &theta)? + rho * tilde.dot(&t));
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok(hi - lo)
}

/// Checks that consecutive BLR states satisfy the multiplicative (Bayes-filter) form
/// of the update, using the `λ̃` stored in `next`.
pub fn multiplicative_form_check(
    family: GaussianFamily,
    prev: &BlrState,
    next: &BlrState,
    rho: f64,
) -> Result<MultiplicativeReport> {
    let tilde = next
        .last_tilde
        .as_ref()
        .ok_or_else(|| Error::Config("state carries no λ̃; not produced by a BLR step".into()))?;
    let spread = multiplicative_form_spread(family, &prev.lambda, &next.lambda, tilde, rho)?;
    Ok(MultiplicativeReport { spread, passed: spread <= MULTIPLICATIVE_TOL })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// `‖λ − λ̃(λ)‖ / max(1, ‖λ‖)`.
    pub residual: f64,
    /// Same check in the Fisher-preconditioned form `λ = F(λ)⁻¹ ∇_λ E[−ℓ̄]`,
    /// with `∇_λ` obtained by the chain rule.
    pub fisher_form_residual: f64,
}

pub fn fixed_point_residual<L: LossModel + ?Sized>(
    family: GaussianFamily,
    lambda: &NaturalParams,
    loss: &L,
    estimator: &Estimator,
) -> Result<ResidualReport> {
    let tilde = estimator.estimate(family, lambda, loss, 0)?.tilde_lambda;
    let scale = lambda.norm().max(1.0);
    let residual = (lambda.as_vector() - &tilde).norm() / scale;
    let fisher = family.fisher(lambda)?;
    let grad_lambda = fisher.matrix() * &tilde;
    let preconditioned = fisher.solve(&grad_lambda)?;
    let fisher_form_residual = (lambda.as_vector() - preconditioned).norm() / scale;
    Ok(ResidualReport { residual, fisher_form_residual })
}

/// `𝓛(q) = E_q[ℓ̄] − H(q)`.
pub fn vb_objective<L: LossModel + ?Sized>(
    family: GaussianFamily,
    lambda: &NaturalParams,
    loss: &L,
    method: ExpectationMethod,
) -> Result<f64> {
    let (expected, _) = method.expected_loss(family, lambda, loss)?;
    Ok(expected - family.entropy(lambda)?)
}

/// `∇_μ 𝓛 = λ − λ̃`.
pub fn vb_objective_dual_gradient(lambda: &NaturalParams, tilde: &DVector<f64>) -> DVector<f64> {
    lambda.as_vector() - tilde
}

const MIRROR_GRAD_TOL: f64 = 1e-10;
const MIRROR_MAX_ITERS: usize = 100;

/// Solves `argmin_μ ⟨μ, λ_t − λ̃⟩ + (1/ρ) KL(q_μ ‖ q_t)` numerically and returns the
/// natural parameters of the minimizer.
///
/// Damped Newton in μ-coordinates: the objective's Hessian is `F(λ(μ))⁻¹ / ρ`,
/// so the step is `−ρ F ∇f`, with backtracking to stay realizable and decrease `f`.
pub fn mirror_descent_step_numeric(
    family: GaussianFamily,
    lambda_t: &NaturalParams,
    tilde: &DVector<f64>,
    rho: f64,
) -> Result<NaturalParams> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Config(format!("learning rate {rho} outside (0, 1]")));
    }
    family.check_dim(tilde)?;
    let lin = lambda_t.as_vector() - tilde;
    let a_t = family.cumulant(lambda_t)?;

    let eval = |mu: &ExpectationParams| -> Option<(f64, DVector<f64>, NaturalParams)> {
        let lambda = family.dual_to_natural(mu).ok()?;
        let kl = a_t - family.cumulant(&lambda).ok()? - (lambda_t.as_vector() - lambda.as_vector()).dot(mu);
        let f = mu.dot(&lin) + kl / rho;
        let grad = &lin + (lambda.as_vector() - lambda_t.as_vector()) / rho;
        Some((f, grad, lambda))
    };

    let mut mu = family.natural_to_dual(lambda_t)?;
    let (mut f, mut grad, mut lambda) =
        eval(&mu).ok_or_else(|| Error::SolverFailure("starting point not realizable".into()))?;
    for _ in 0..MIRROR_MAX_ITERS {
        if grad.norm() <= MIRROR_GRAD_TOL {
            return Ok(lambda);
        }
        let fisher = family.fisher(&lambda)?;
        let dir = -(fisher.matrix() * &grad) * rho;
        let slope = grad.dot(&dir);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = ExpectationParams::new(mu.as_vector() + &dir * step)?;
            if let Some((fc, gc, lc)) = eval(&cand) {
                let armijo = fc <= f + 1e-4 * step * slope;
                let flat = (fc - f).abs() <= 1e-14 * f.abs().max(1.0) && gc.norm() < grad.norm();
                if armijo || flat {
                    accepted = Some((cand, fc, gc, lc));
                    break;
                }
            }
            step *= 0.5;
        }
        let (m, fc, gc, lc) = accepted.ok_or_else(|| Error::SolverFailure("line search stalled".into()))?;
        mu = m;
        f = fc;
        grad = gc;
        lambda = lc;
    }
    if grad.norm() <= MIRROR_GRAD_TOL {
        Ok(lambda)
    } else {
        Err(Error::SolverFailure(format!("gradient norm {:e} after {MIRROR_MAX_ITERS} iterations", grad.norm())))
    }
}

/// Newton step on `ℓ̄` at `m_t`: `m_{t+1} = m_t − H⁻¹∇ℓ̄(m_t)`, `S_{t+1} = H(m_t)`.
pub fn newton_recovery_step<L: LossModel + ?Sized>(
    mean: &DVector<f64>,
    loss: &L,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let h = loss.hessian_full(mean).ok_or(Error::MissingHessian)?;
    let chol = cholesky(&h).ok_or(Error::NonPdHessian)?;
    let g = loss.gradient(mean);
    Ok((mean - chol.solve(&g), h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blr::{blr_update, ConjugateModel};
    use crate::models::{QuadraticLoss, RidgeModel};

    #[test]
    fn corrupted_step_fails_multiplicative_check() {
        let fam = GaussianFamily::Full(2);
        let prev =
            BlrState::new(fam, fam.pack(&DVector::zeros(2), &(DMatrix::identity(2, 2) * -0.5)).try_into_nat()).unwrap();
        let tilde = DVector::from_vec(vec![1.0, -0.5, -1.0, 0.2, -0.75]);
        let next = blr_update(fam, &prev, &tilde, 0.3).unwrap();
        assert!(multiplicative_form_check(fam, &prev, &next, 0.3).unwrap().passed);
        let mut bad = next.clone();
        let mut v = bad.lambda.clone().into_inner();
        v[0] += 1e-3;
        bad.lambda = NaturalParams::new(v).unwrap();
        assert!(!multiplicative_form_check(fam, &prev, &bad, 0.3).unwrap().passed);
    }

    trait TryIntoNat {
        fn try_into_nat(self) -> NaturalParams;
    }

    impl TryIntoNat for DVector<f64> {
        fn try_into_nat(self) -> NaturalParams {
            NaturalParams::new(self).unwrap()
        }
    }

    #[test]
    fn prior_is_not_stationary_but_posterior_is() {
        let ridge = RidgeModel::new(DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, 2.0]), 1.0).unwrap();
        let cm = ConjugateModel::from_ridge(&ridge).unwrap();
        let loss = cm.loss();
        let fam = cm.family;
        let post = crate::blr::conjugate_posterior(&cm).unwrap();
        let r = fixed_point_residual(fam, &post, &loss, &Estimator::Exact).unwrap();
        assert!(r.residual <= 1e-10 && r.fisher_form_residual <= 1e-10);
        let prior = NaturalParams::new(cm.prior.clone()).unwrap();
        assert!(fixed_point_residual(fam, &prior, &loss, &Estimator::Exact).unwrap().residual > 0.1);
    }

    #[test]
    fn mirror_descent_special_cases() {
        let fam = GaussianFamily::Full(1);
        let lt = NaturalParams::from_slice(&[0.5, -0.7]).unwrap();
        let tilde = DVector::from_vec(vec![2.0, -1.5]);
        let full = mirror_descent_step_numeric(fam, &lt, &tilde, 1.0).unwrap();
        assert!((full.as_vector() - &tilde).amax() < 1e-9);
        let stay = mirror_descent_step_numeric(fam, &lt, &lt.clone().into_inner(), 0.4).unwrap();
        assert!((stay.as_vector() - lt.as_vector()).amax() < 1e-12);
        let part = mirror_descent_step_numeric(fam, &lt, &tilde, 0.3).unwrap();
        let closed = lt.as_vector() * 0.7 + &tilde * 0.3;
        assert!((part.as_vector() - closed).amax() < 1e-6);
    }

    #[test]
    fn newton_on_quadratic_and_stationary_point() {
        let q = QuadraticLoss::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            DVector::from_vec(vec![1.0, -1.0]),
            0.0,
        );
        let (m1, s1) = newton_recovery_step(&DVector::from_vec(vec![5.0, -3.0]), &q).unwrap();
        assert!((&m1 - q.minimizer().unwrap()).amax() < 1e-12);
        assert_eq!(s1, q.a);
        let (m2, _) = newton_recovery_step(&m1, &q).unwrap();
        assert!((&m2 - &m1).amax() < 1e-12);
        let neg = QuadraticLoss::new(DMatrix::from_element(1, 1, -1.0), DVector::zeros(1), 0.0);
        assert_eq!(newton_recovery_step(&DVector::zeros(1), &neg), Err(Error::NonPdHessian));
    }

    #[test]
    fn zero_loss_objective_is_negative_entropy() {
        let fam = GaussianFamily::Full(1);
        let l = NaturalParams::from_slice(&[0.3, -0.9]).unwrap();
        let zero = QuadraticLoss::new(DMatrix::zeros(1, 1), DVector::zeros(1), 0.0);
        let v = vb_objective(fam, &l, &zero, ExpectationMethod::Analytic).unwrap();
        assert_eq!(v, -fam.entropy(&l).unwrap());
    }
}
