//! Natural gradients of expected losses under Gaussian families.
//!
//! The central quantity is `λ̃ = ∇_μ E_q[−ℓ̄(θ)]`. For a Gaussian `q = N(m, S⁻¹)`
//! it can be written with the gradient and Hessian of the loss as
//! `λ̃ = (E[−∇ℓ̄ + H m], −½ E[H])`, packed in the family's coordinate layout.
//! The estimators below differ only in how those two expectations are taken.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expfam::{ExponentialFamily, NaturalParams};
use crate::gaussian::{rng_from_seed, GaussianFamily};
use crate::linalg::{self, central_gradient, central_jacobian};
use crate::quadrature::GaussHermite;

/// Closed-form Gaussian expectations of a loss and its derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianExpectations {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// The target `ℓ̄(θ)`: negative log-joint, up to an additive constant.
pub trait LossModel {
    fn dim(&self) -> usize;

    fn value(&self, theta: &DVector<f64>) -> f64;

    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64>;

    fn hessian_full(&self, _theta: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    fn hessian_diag(&self, theta: &DVector<f64>) -> Option<DVector<f64>> {
        self.hessian_full(theta).map(|h| h.diagonal())
    }

    /// Number of data examples a minibatch can index into.
    fn num_data(&self) -> usize {
        1
    }

    /// Unbiased minibatch gradient of the full-data loss (data term rescaled by `N/|batch|`).
    fn batch_gradient(&self, theta: &DVector<f64>, _batch: &[usize]) -> DVector<f64> {
        self.gradient(theta)
    }

    fn batch_hessian_diag(&self, theta: &DVector<f64>, _batch: &[usize]) -> Option<DVector<f64>> {
        self.hessian_diag(theta)
    }

    /// `E_q[ℓ̄]`, `E_q[∇ℓ̄]`, `E_q[H]` under `N(mean, cov)` when available in closed form.
    fn gaussian_expectations(&self, _mean: &DVector<f64>, _cov: &DMatrix<f64>) -> Option<GaussianExpectations> {
        None
    }

    /// Coefficients `c` with `ℓ̄(θ) = −⟨c, T(θ)⟩ + const` in the given family, if the
    /// loss is linear in that family's sufficient statistics.
    fn natural_coefficients(&self, _family: GaussianFamily) -> Option<DVector<f64>> {
        None
    }
}

impl<L: LossModel + ?Sized> LossModel for &L {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, theta: &DVector<f64>) -> f64 {
        (**self).value(theta)
    }
    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        (**self).gradient(theta)
    }
    fn hessian_full(&self, theta: &DVector<f64>) -> Option<DMatrix<f64>> {
        (**self).hessian_full(theta)
    }
    fn hessian_diag(&self, theta: &DVector<f64>) -> Option<DVector<f64>> {
        (**self).hessian_diag(theta)
    }
    fn num_data(&self) -> usize {
        (**self).num_data()
    }
    fn batch_gradient(&self, theta: &DVector<f64>, batch: &[usize]) -> DVector<f64> {
        (**self).batch_gradient(theta, batch)
    }
    fn batch_hessian_diag(&self, theta: &DVector<f64>, batch: &[usize]) -> Option<DVector<f64>> {
        (**self).batch_hessian_diag(theta, batch)
    }
    fn gaussian_expectations(&self, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Option<GaussianExpectations> {
        (**self).gaussian_expectations(mean, cov)
    }
    fn natural_coefficients(&self, family: GaussianFamily) -> Option<DVector<f64>> {
        (**self).natural_coefficients(family)
    }
}

/// Result of the finite-difference derivative verifier.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeCheck {
    pub gradient_rel_err: f64,
    pub hessian_rel_err: Option<f64>,
}

impl DerivativeCheck {
    pub const GRADIENT_TOL: f64 = 1e-4;
    pub const HESSIAN_TOL: f64 = 1e-3;

    pub fn passed(&self) -> bool {
        self.gradient_rel_err <= Self::GRADIENT_TOL && self.hessian_rel_err.is_none_or(|e| e <= Self::HESSIAN_TOL)
    }
}

/// Compares the analytic gradient (and Hessian, if provided) against central differences.
pub fn verify_derivatives<L: LossModel + ?Sized>(loss: &L, theta: &DVector<f64>) -> DerivativeCheck {
    let fd_grad = central_gradient(|t| loss.value(t), theta);
    let grad = loss.gradient(theta);
    let gradient_rel_err = linalg::rel_norm_diff(&grad, &fd_grad);
    let hessian_rel_err = match loss.hessian_full(theta) {
        Some(h) => {
            let fd = central_jacobian(|t| loss.gradient(t), theta);
            Some((&h - &fd).norm() / fd.norm().max(1.0))
        }
        None => loss.hessian_diag(theta).map(|hd| {
            let fd = central_jacobian(|t| loss.gradient(t), theta).diagonal();
            linalg::rel_norm_diff(&hd, &fd)
        }),
    };
    DerivativeCheck { gradient_rel_err, hessian_rel_err }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Exact,
    Quadrature,
    Delta,
    Mc,
}

/// How `λ̃` is estimated at each iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Estimator {
    /// Closed form: the linear-in-T fast path, else analytic Gaussian expectations.
    Exact,
    /// Tensor Gauss–Hermite expectations of gradient and Hessian.
    Quadrature { nodes: usize },
    /// Gradient and Hessian evaluated at the mean.
    Delta,
    /// `samples` Monte-Carlo draws; iteration `t` uses stream `t` of `seed`.
    Mc { samples: usize, seed: u64 },
}

impl Estimator {
    pub fn is_stochastic(&self) -> bool {
        matches!(self, Estimator::Mc { .. })
    }

    pub fn estimate<L: LossModel + ?Sized>(
        &self,
        family: GaussianFamily,
        lambda: &NaturalParams,
        loss: &L,
        iteration: u64,
    ) -> Result<NatGradEstimate> {
        match *self {
            Estimator::Exact => natgrad_exact(family, lambda, loss),
            Estimator::Quadrature { nodes } => natgrad_quadrature(family, lambda, loss, nodes),
            Estimator::Delta => natgrad_delta_method(family, lambda, loss),
            Estimator::Mc { samples, seed } => {
                natgrad_gaussian_identity_stream(family, lambda, loss, samples, seed, iteration)
            }
        }
    }
}

/// An estimate of `λ̃ = ∇_μ E_q[−ℓ̄]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NatGradEstimate {
    pub tilde_lambda: DVector<f64>,
    pub kind: EstimatorKind,
    pub samples: usize,
    pub seed: Option<u64>,
    /// Per-coordinate Monte-Carlo standard error, when sampled.
    pub std_error: Option<DVector<f64>>,
}

impl NatGradEstimate {
    fn deterministic(tilde_lambda: DVector<f64>, kind: EstimatorKind) -> Result<Self> {
        if tilde_lambda.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite natural-gradient estimate".into()));
        }
        Ok(Self { tilde_lambda, kind, samples: 0, seed: None, std_error: None })
    }
}

/// Packs `(−g + H m, −½H)`; the diagonal family only sees `diag(H)`.
fn pack_gaussian_identity(
    family: GaussianFamily,
    mean: &DVector<f64>,
    grad: &DVector<f64>,
    hess: &DMatrix<f64>,
) -> DVector<f64> {
    let hm = match family {
        GaussianFamily::Full(_) => hess * mean,
        GaussianFamily::Diagonal(_) => hess.diagonal().component_mul(mean),
    };
    family.pack(&(hm - grad), &(hess * -0.5))
}

fn pack_gaussian_identity_diag(mean: &DVector<f64>, grad: &DVector<f64>, hdiag: &DVector<f64>) -> DVector<f64> {
    let linear = hdiag.component_mul(mean) - grad;
    let mut out: Vec<f64> = linear.iter().copied().collect();
    out.extend(hdiag.iter().map(|h| -0.5 * h));
    DVector::from_vec(out)
}

/// Converts a `μ`-gradient into `λ` coordinates by the chain rule `∇_λ = F ∇_μ`,
/// then recovers it with `F⁻¹`. Returns the recovered natural gradient; errors if
/// the round trip disagrees beyond `1e-8` relative, which signals an ill-posed Fisher.
pub fn natgrad_via_dual(
    family: &impl ExponentialFamily,
    lambda: &NaturalParams,
    grad_wrt_mu: &DVector<f64>,
) -> Result<DVector<f64>> {
    family.check_dim(grad_wrt_mu)?;
    let fisher = family.fisher(lambda)?;
    let grad_wrt_lambda = fisher.matrix() * grad_wrt_mu;
    let recovered = fisher.solve(&grad_wrt_lambda)?;
    let scale = grad_wrt_mu.amax().max(1.0);
    if (&recovered - grad_wrt_mu).amax() > 1e-8 * scale {
        return Err(Error::SingularFisher);
    }
    Ok(recovered)
}

/// `F(λ)⁻¹ ∇_λ`.
pub fn natural_gradient(
    family: &impl ExponentialFamily,
    lambda: &NaturalParams,
    grad_wrt_lambda: &DVector<f64>,
) -> Result<DVector<f64>> {
    family.check_dim(grad_wrt_lambda)?;
    family.fisher(lambda)?.solve(grad_wrt_lambda)
}

/// Monte-Carlo form of the Gaussian gradient/Hessian identity with `k` draws.
pub fn natgrad_gaussian_identity<L: LossModel + ?Sized>(
    family: GaussianFamily,
    lambda: &NaturalParams,
    loss: &L,
    k: usize,
    seed: u64,
) -> Result<NatGradEstimate> {
    natgrad_gaussian_identity_stream(family, lambda, loss, k, seed, 0)
}

fn natgrad_gaussian_identity_stream<L: LossModel + ?Sized>(
    family: GaussianFamily,
    lambda: &NaturalParams,
    loss: &L,
    k: usize,
    seed: u64,
    stream: u64,
) -> Result<NatGradEstimate> {
    let mean = family.mean(lambda)?;
    let mut rng = rng_from_seed(seed, stream);
    let draws = family.sample_with(lambda, k, &mut rng)?;
    let d = family.param_dim();
    let mut sum = DVector::zeros(d);
    let mut sum_sq = DVector::zeros(d);
    for theta in draws.column_iter() {
        let theta = theta.into_owned();
        let grad = loss.gradient(&theta);
        let per_sample = match family {
            GaussianFamily::Full(_) => {
                let h = loss.hessian_full(&theta).ok_or(Error::MissingHessian)?;
                pack_gaussian_identity(family, &mean, &grad, &h)
            }
            GaussianFamily::Diagonal(_) => {
                let h = loss.hessian_diag(&theta).ok_or(Error::MissingHessian)?;
                pack_gaussian_identity_diag(&mean, &grad, &h)
            }
        };
        sum_sq += per_sample.component_mul(&per_sample);
        sum += per_sample;
    }
    let kf = k as f64;
    let avg = sum / kf;
    let std_error = if k > 1 {
        let var = (sum_sq / kf - avg.component_mul(&avg)).map(|v| v.max(0.0)) * (kf / (kf - 1.0));
        Some(var.map(|v| (v / kf).sqrt()))
    } else {
        None
    };
    if avg.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite Monte-Carlo estimate".into()));
    }
    Ok(NatGradEstimate { tilde_lambda: avg, kind: EstimatorKind::Mc, samples: k, seed: Some(seed), std_error })
}

/// Delta method: gradient and Hessian at the mean in place of their expectations.
pub fn natgrad_delta_method<L: LossModel + ?Sized>(
    family: GaussianFamily,
    lambda: &NaturalParams,
    loss: &L,
) -> Result<NatGradEstimate> {
    let mean = family.mean(lambda)?;
    let grad = loss.gradient(&mean);
    let out = match family {
        GaussianFamily::Full(_) => {
            let h = loss.hessian_full(&mean).ok_or(Error::MissingHessian)?;
            pack_gaussian_identity(family, &mean, &grad, &h)
        }
        GaussianFamily::Diagonal(_) => {
            let h = loss.hessian_diag(&mean).ok_or(Error::MissingHessian)?;
            pack_gaussian_identity_diag(&mean, &grad, &h)
        }
    };
    NatGradEstimate::deterministic(out, EstimatorKind::Delta)
}

/// Closed-form estimate: linear-in-T losses take the fast path, other losses need
/// analytic Gaussian expectations.
pub fn natgrad_exact<L: LossModel + ?Sized>(
    family: GaussianFamily,
    lambda: &NaturalParams,
    loss: &L,
) -> Result<NatGradEstimate> {
    if !family.is_valid(lambda) {
        return Err(Error::Domain("natural parameters outside Ω".into()));
    }
    if let Some(coeff) = loss.natural_coefficients(family) {
        return NatGradEstimate::deterministic(-linear_loss_natgrad(&coeff), EstimatorKind::Exact);
    }
    let mean = family.mean(lambda)?;
    let cov = family.covariance(lambda)?;
    let e = loss.gaussian_expectations(&mean, &cov).ok_or(Error::NoExactExpectation)?;
    NatGradEstimate::deterministic(pack_gaussian_identity(family, &mean, &e.gradient, &e.hessian), EstimatorKind::Exact)
}

/// Gauss–Hermite expectations of gradient and Hessian (`nodes^P` evaluations).
pub fn natgrad_quadrature<L: LossModel + ?Sized>(
    family: GaussianFamily,
    lambda: &NaturalParams,
    loss: &L,
    nodes: usize,
) -> Result<NatGradEstimate> {
    let mean = family.mean(lambda)?;
    let cov = family.covariance(lambda)?;
    let gh = GaussHermite::new(nodes);
    let mut missing = false;
    let p = family.dim();
    let packed: DVector<f64> = gh.expect(&mean, &cov, |theta| {
        let grad = loss.gradient(theta);
        let h = match family {
            GaussianFamily::Full(_) => loss.hessian_full(theta),
            GaussianFamily::Diagonal(_) => loss.hessian_diag(theta).map(|d| DMatrix::from_diagonal(&d)),
        };
        match h {
            Some(h) => {
                let mut v = DVector::zeros(p + p * p);
                v.rows_mut(0, p).copy_from(&grad);
                v.rows_mut(p, p * p).copy_from_slice(h.as_slice());
                v
            }
            None => {
                missing = true;
                DVector::zeros(p + p * p)
            }
        }
    })?;
    if missing {
        return Err(Error::MissingHessian);
    }
    let grad = packed.rows(0, p).into_owned();
    let hess = DMatrix::from_column_slice(p, p, packed.rows(p, p * p).as_slice());
    NatGradEstimate::deterministic(pack_gaussian_identity(family, &mean, &grad, &hess), EstimatorKind::Quadrature)
}

/// `∇_μ E_q[ℓ̄]` for `ℓ̄ = −⟨c, T(θ)⟩ + const`: exactly `−c`, whatever `q` is.
pub fn linear_loss_natgrad(coeff: &DVector<f64>) -> DVector<f64> {
    -coeff
}

/// Single-draw reparameterization estimate of `diag(E_q[H])` for a diagonal
/// Gaussian with precision `s`: `ĝ ⊙ s ⊙ (θ − m)`, with `ĝ = ∇ℓ̄(θ)`.
pub fn reparam_hessian_diag_estimate(
    mean: &DVector<f64>,
    precision: &DVector<f64>,
    theta: &DVector<f64>,
    grad_at_theta: &DVector<f64>,
) -> DVector<f64> {
    let centered = theta - mean;
    grad_at_theta.component_mul(precision).component_mul(&centered)
}

/// Exact `E_q[ℓ̄]` via the loss's closed form, Gauss–Hermite quadrature, or Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ExpectationMethod {
    Analytic,
    Quadrature { nodes: usize },
    Mc { samples: usize, seed: u64 },
}

impl ExpectationMethod {
    /// Analytic when the loss supports it, quadrature for `P ≤ 2`, Monte Carlo otherwise.
    pub fn auto<L: LossModel + ?Sized>(loss: &L) -> Self {
        let p = loss.dim();
        let probe_mean = DVector::zeros(p);
        let probe_cov = DMatrix::identity(p, p);
        if loss.gaussian_expectations(&probe_mean, &probe_cov).is_some() {
            ExpectationMethod::Analytic
        } else if p <= 2 {
            ExpectationMethod::Quadrature { nodes: 40 }
        } else {
            ExpectationMethod::Mc { samples: 100_000, seed: 0 }
        }
    }

    /// Returns the estimate and its Monte-Carlo standard error (zero for deterministic methods).
    pub fn expected_loss<L: LossModel + ?Sized>(
        &self,
        family: GaussianFamily,
        lambda: &NaturalParams,
        loss: &L,
    ) -> Result<(f64, f64)> {
        let mean = family.mean(lambda)?;
        let cov = family.covariance(lambda)?;
        match *self {
            ExpectationMethod::Analytic => {
                loss.gaussian_expectations(&mean, &cov).map(|e| (e.value, 0.0)).ok_or(Error::NoExactExpectation)
            }
            ExpectationMethod::Quadrature { nodes } => {
                let v: f64 = GaussHermite::new(nodes).expect(&mean, &cov, |t| loss.value(t))?;
                Ok((v, 0.0))
            }
            ExpectationMethod::Mc { samples, seed } => {
                let batch = family.sample(lambda, samples, seed)?;
                let vals: Vec<f64> = batch.samples.column_iter().map(|c| loss.value(&c.into_owned())).collect();
                let n = vals.len() as f64;
                let avg = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                Ok((avg, (var / n).sqrt()))
            }
        }
    }
}
