//! Self-verification suite: each check compares a library code path against an
//! independent route (finite differences, closed forms, a second algorithm).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::blr::{
    blr_step, conjugate_posterior, mirror_descent_step_numeric, newton_recovery_step, BlrConfig, BlrState,
    ConjugateModel, RhoSchedule,
};
use crate::deep::{
    ivon_step, rmsprop_step, von_step, Curvature, IvonConfig, IvonState, RmspropConfig, RmspropState, VonConfig,
    VonExpectation, VonState,
};
use crate::error::{Error, Result};
use crate::expfam::{ExponentialFamily, NaturalParams};
use crate::gaussian::{random_moment, random_natural, rng_from_seed, GaussianFamily};
use crate::harness::run::run_blr;
use crate::linalg::{central_gradient, central_jacobian, rel_norm_diff};
use crate::models::{
    logistic_synthetic, ridge_exact_posterior, ridge_synthetic, two_spirals, Activation, LogisticModel, MlpModel,
    Penalized, QuadraticLoss, RidgeModel,
};
use crate::natgrad::{
    natgrad_exact, natgrad_gaussian_identity, natural_gradient, reparam_hessian_diag_estimate, verify_derivatives,
    Estimator, LossModel,
};

const SEED: u64 = 0x5EED;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    All,
    Expfam,
    Natgrad,
    Conjugate,
    Blr,
    Estimators,
    Models,
    Deep,
}

impl Scope {
    pub const NAMES: [&'static str; 8] =
        ["all", "expfam", "natgrad", "conjugate", "blr", "estimators", "models", "deep"];

    fn includes(self, other: Scope) -> bool {
        self == Scope::All || self == other
    }
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Scope::All,
            "expfam" => Scope::Expfam,
            "natgrad" => Scope::Natgrad,
            "conjugate" => Scope::Conjugate,
            "blr" => Scope::Blr,
            "estimators" => Scope::Estimators,
            "models" => Scope::Models,
            "deep" => Scope::Deep,
            _ => return Err(Error::Config(format!("unknown scope `{s}`; expected one of {:?}", Self::NAMES))),
        })
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = [
            Scope::All,
            Scope::Expfam,
            Scope::Natgrad,
            Scope::Conjugate,
            Scope::Blr,
            Scope::Estimators,
            Scope::Models,
            Scope::Deep,
        ]
        .iter()
        .position(|s| s == self)
        .expect("listed");
        f.write_str(Self::NAMES[i])
    }
}

/// Deliberate faults for testing the suite itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sabotage {
    /// Flips the sign of the entropy gradient. CLI id `eq4` (alias `entropy-sign`).
    EntropySign,
    /// Takes the one-step conjugate update with `ρ = 0.5` instead of 1. CLI id `one-step`.
    OneStep,
}

impl FromStr for Sabotage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eq4" | "entropy-sign" => Ok(Sabotage::EntropySign),
            "one-step" => Ok(Sabotage::OneStep),
            _ => Err(Error::Config(format!("unknown sabotage `{s}`; expected eq4, entropy-sign or one-step"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub id: &'static str,
    pub scope: Scope,
    pub passed: bool,
    /// Worst observed error against its tolerance, or the failure message.
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, id: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:<18} {:<11} {:<6} detail\n", "check", "scope", "result");
        for c in &self.checks {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("{:<18} {:<11} {:<6} {}\n", c.id, c.scope.to_string(), verdict, c.detail));
        }
        out
    }
}

type Check = fn(Option<Sabotage>) -> Result<(f64, f64)>;

/// `(id, scope, check)`; a check returns `(worst error, tolerance)`.
const CHECKS: &[(&str, Scope, Check)] = &[
    ("duality", Scope::Expfam, check_duality),
    ("fisher_fd", Scope::Expfam, check_fisher_fd),
    ("entropy_gradient", Scope::Expfam, check_entropy_gradient),
    ("fenchel", Scope::Expfam, check_fenchel),
    ("kl_bregman", Scope::Expfam, check_kl),
    ("dual_natgrad", Scope::Natgrad, check_dual_natgrad),
    ("linear_loss", Scope::Conjugate, check_linear_loss),
    ("one_step_bayes", Scope::Conjugate, check_one_step),
    ("multiplicative", Scope::Blr, check_multiplicative),
    ("mirror_descent", Scope::Blr, check_mirror_descent),
    ("newton_recovery", Scope::Blr, check_newton),
    ("mc_unbiased", Scope::Estimators, check_mc_unbiased),
    ("reparam_hessian", Scope::Estimators, check_reparam),
    ("derivatives", Scope::Models, check_derivatives),
    ("von_is_blr", Scope::Deep, check_von_blr),
    ("rmsprop_reduction", Scope::Deep, check_rmsprop_reduction),
    ("ivon_positive", Scope::Deep, check_ivon_positive),
];

/// Runs every check in `scope`, with an optional injected fault.
pub fn verify_suite(scope: Scope, sabotage: Option<Sabotage>) -> VerifyReport {
    let checks = CHECKS
        .iter()
        .filter(|(_, s, _)| scope.includes(*s))
        .map(|(id, s, f)| {
            let (passed, detail) = match f(sabotage) {
                Ok((err, tol)) => (err <= tol, format!("{err:.3e} (tol {tol:.0e})")),
                Err(e) => (false, format!("error: {e}")),
            };
            CheckResult { id, scope: *s, passed, detail }
        })
        .collect();
    VerifyReport { checks }
}

fn families(max_p: usize) -> impl Iterator<Item = GaussianFamily> {
    (1..=max_p).flat_map(|p| [GaussianFamily::Full(p), GaussianFamily::Diagonal(p)])
}

fn check_duality(_: Option<Sabotage>) -> Result<(f64, f64)> {
    let mut rng = rng_from_seed(SEED, 1);
    let mut worst: f64 = 0.0;
    for fam in families(5) {
        for _ in 0..4 {
            let lambda = random_natural(fam, &mut rng);
            let back = fam.dual_to_natural(&fam.natural_to_dual(&lambda)?)?;
            worst = worst.max(rel_norm_diff(back.as_vector(), lambda.as_vector()));
        }
    }
    Ok((worst, 1e-9))
}

fn check_fisher_fd(_: Option<Sabotage>) -> Result<(f64, f64)> {
    let mut rng = rng_from_seed(SEED, 2);
    let mut worst: f64 = 0.0;
    for fam in families(4) {
        let lambda = random_natural(fam, &mut rng);
        let fd = central_jacobian(
            |l| fam.natural_to_dual(&NaturalParams::new(l.clone()).unwrap()).unwrap().into_inner(),
            lambda.as_vector(),
        );
        let f = fam.fisher(&lambda)?;
        worst = worst.max((f.matrix() - &fd).norm() / fd.norm().max(1.0));
    }
    Ok((worst, 1e-5))
}

fn check_entropy_gradient(sabotage: Option<Sabotage>) -> Result<(f64, f64)> {
    let mut rng = rng_from_seed(SEED, 3);
    let mut worst: f64 = 0.0;
    for fam in families(4) {
        let lambda = random_natural(fam, &mut rng);
        let mut g = fam.entropy_gradient(&lambda)?;
        if sabotage == Some(Sabotage::EntropySign) {
            g = -g;
        }
        let fd =
            central_gradient(|l| fam.entropy(&NaturalParams::new(l.clone()).unwrap()).unwrap(), lambda.as_vector());
        worst = worst.max(rel_norm_diff(&g, &fd));
    }
    Ok((worst, 1e-5))
}

fn check_fenchel(_: Option<Sabotage>) -> Result<(f64, f64)> {
    let mut rng = rng_from_seed(SEED, 4);
    let mut worst: f64 = 0.0;
    for fam in families(5) {
        let lambda = random_natural(fam, &mut rng);
        let h = fam.entropy(&lambda)?;
        let a_star = fam.fenchel_conjugate(&fam.natural_to_dual(&lambda)?)?;
        worst = worst.max((h + a_star).abs() / h.abs().max(1.0));
    }
    Ok((worst, 1e-10))
}

/// Closed-form Gaussian KL in moment coordinates.
fn gaussian_kl(ma: &DVector<f64>, sa: &DMatrix<f64>, mb: &DVector<f64>, sb: &DMatrix<f64>) -> f64 {
    let p = ma.len() as f64;
    let cov_a = sa.clone().try_inverse().expect("PD");
    let d = mb - ma;
    let logdet = |m: &DMatrix<f64>| 2.0 * m.clone().cholesky().expect("PD").l().diagonal().map(f64::ln).sum();
    0.5 * ((sb * cov_a).trace() + d.dot(&(sb * &d)) - p + logdet(sa) - logdet(sb))
}

fn check_kl(_: Option<Sabotage>) -> Result<(f64, f64)> {
    let mut rng = rng_from_seed(SEED, 5);
    let mut worst: f64 = 0.0;
    for fam in families(4) {
        let a = random_moment(fam, &mut rng);
        let b = random_moment(fam, &mut rng);
        let kl = fam.kl_divergence(&fam.moment_to_natural(&a)?, &fam.moment_to_natural(&b)?)?;
        let closed = gaussian_kl(&a.mean, &a.precision.to_matrix(), &b.mean, &b.precision.to_matrix());
        worst = worst.max((kl - closed).abs() / closed.abs().max(1.0));
    }
    Ok((worst, 1e-9))
}

/// `−E_q[ℓ̄]` in closed form for a quadratic.
fn neg_expected(fam: GaussianFamily, q: &QuadraticLoss, l: &DVector<f64>) -> f64 {
    let lambda = NaturalParams::new(l.clone()).unwrap();
    let mean = fam.mean(&lambda).unwrap();
    let cov = fam.covariance(&lambda).unwrap();
    -q.gaussian_expectations(&mean, &cov).unwrap().value
}

fn diag_quadratic<R: Rng + ?Sized>(p: usize, rng: &mut R) -> QuadraticLoss {
    let a = DVector::from_fn(p, |_, _| rng.random_range(0.5..3.0));
    let b = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
    QuadraticLoss::diagonal(a, b)
}

fn check_dual_natgrad(_: Option<Sabotage>) -> Result<(f64, f64)> {
    let mut rng = rng_from_seed(SEED, 6);
    let mut worst: f64 = 0.0;
    for fam in families(3) {
        let lambda = random_natural(fam, &mut rng);
        let q = if fam.is_full() {
            QuadraticLoss::random(fam.dim(), &mut rng)
        } else {
            diag_quadratic(fam.dim(), &mut rng)
        };
        let grad_lambda = central_gradient(|l| neg_expected(fam, &q, l), lambda.as_vector());
        let via_fisher = natural_gradient(&fam, &lambda, &grad_lambda)?;
        let dual = natgrad_exact(fam, &lambda, &q)?.tilde_lambda;
        worst = worst.max(rel_norm_diff(&via_fisher, &dual));
    }
    Ok((worst, 1e-6))
}

fn check_linear_loss(_: Option<Sabotage>) -> Result<(f64, f64)> {
    let mut rng = rng_from_seed(SEED, 7);
    let mut worst: f64 = 0.0;
    for fam in families(3) {
        let coeff = random_natural(fam, &mut rng).into_inner();
        let loss = QuadraticLoss::from_natural_coefficients(fam, &coeff);
        for _ in 0..5 {
            let q = random_natural(fam, &mut rng);
            let exact = natgrad_exact(fam, &q, &loss)?.tilde_lambda;
            if exact != coeff {
                return Ok((f64::INFINITY, 0.0));
            }
            // The delta route uses gradient and Hessian, not the coefficients.
            let delta = crate::natgrad::natgrad_delta_method(fam, &q, &loss)?.tilde_lambda;
            worst = worst.max(rel_norm_diff(&delta, &coeff));
        }
    }
    Ok((worst, 1e-12))
}

fn check_one_step(sabotage: Option<Sabotage>) -> Result<(f64, f64)> {
    let rho = if sabotage == Some(Sabotage::OneStep) { 0.5 } else { 1.0 };
    let mut rng = rng_from_seed(SEED, 8);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let p = 1 + i % 4;
        let d = ridge_synthetic(20 + 3 * i, p, SEED + i as u64);
        let ridge = RidgeModel::new(d.x, d.y, rng.random_range(0.5..2.0))?;
        let fam = GaussianFamily::Full(p);
        let exact = fam.moment_to_natural(&ridge_exact_posterior(&ridge)?)?;
        let conj = conjugate_posterior(&ConjugateModel::from_ridge(&ridge)?)?;
        worst = worst.max(rel_norm_diff(conj.as_vector(), exact.as_vector()));
        let cfg = BlrConfig::new(RhoSchedule::constant(rho), Estimator::Exact);
        let state = BlrState::new(fam, random_natural(fam, &mut rng))?;
        let next = blr_step(fam, &state, &ridge.loss(), &cfg)?;
        worst = worst.max(rel_norm_diff(next.lambda.as_vector(), exact.as_vector()));
    }
    Ok((worst, 1e-10))
}

fn logistic(n: usize, seed: u64) -> Result<LogisticModel> {
    let d = logistic_synthetic(n, 2, 0.1, seed);
    LogisticModel::new(d.x, d.y)
}

fn check_multiplicative(_: Option<Sabotage>) -> Result<(f64, f64)> {
    let fit = logistic(60, SEED)?;
    let loss = Penalized::new(&fit, 1.0);
    let mut worst: f64 = 0.0;
    for (fam, est) in [
        (GaussianFamily::Full(2), Estimator::Quadrature { nodes: 12 }),
        (GaussianFamily::Diagonal(2), Estimator::Mc { samples: 8, seed: 3 }),
    ] {
        let mut cfg = BlrConfig::new(RhoSchedule::constant(0.3), est);
        cfg.max_iters = 10;
        let init = fam.moment_to_natural(&crate::gaussian::GaussianMoment {
            mean: DVector::zeros(2),
            precision: match fam {
                GaussianFamily::Full(_) => crate::gaussian::Precision::Full(DMatrix::identity(2, 2)),
                GaussianFamily::Diagonal(_) => crate::gaussian::Precision::Diagonal(DVector::from_element(2, 1.0)),
            },
        })?;
        let run = run_blr(fam, &loss, &cfg, init).map_err(|f| f.error)?;
        worst = worst.max(run.max_multiplicative_spread());
    }
    Ok((worst, crate::blr::MULTIPLICATIVE_TOL))
}

fn check_mirror_descent(_: Option<Sabotage>) -> Result<(f64, f64)> {
    let mut rng = rng_from_seed(SEED, 9);
    let mut worst: f64 = 0.0;
    for fam in families(2) {
        for _ in 0..3 {
            let lt = random_natural(fam, &mut rng);
            let tilde = random_natural(fam, &mut rng).into_inner();
            let rho = rng.random_range(0.1..0.9);
            let numeric = mirror_descent_step_numeric(fam, &lt, &tilde, rho)?;
            let closed = lt.as_vector() * (1.0 - rho) + &tilde * rho;
            worst = worst.max(rel_norm_diff(numeric.as_vector(), &closed));
        }
    }
    Ok((worst, 1e-6))
}

fn check_newton(_: Option<Sabotage>) -> Result<(f64, f64)> {
    let fit = logistic(80, SEED + 1)?;
    let loss = Penalized::new(&fit, 1.0);
    let fam = GaussianFamily::Full(2);
    let cfg = BlrConfig::new(RhoSchedule::constant(1.0), Estimator::Delta);
    let mut state = BlrState::new(fam, NaturalParams::from_slice(&[0.0, 0.0, -0.5, 0.0, -0.5])?)?;
    let mut worst: f64 = 0.0;
    for _ in 0..6 {
        let m = fam.mean(&state.lambda)?;
        let (m_newton, h) = newton_recovery_step(&m, &loss)?;
        state = blr_step(fam, &state, &loss, &cfg)?;
        let moment = fam.natural_to_moment(&state.lambda)?;
        worst = worst.max(rel_norm_diff(&moment.mean, &m_newton));
        let s = moment.precision.to_matrix();
        worst = worst.max((s - &h).norm() / h.norm().max(1.0));
    }
    Ok((worst, 1e-10))
}

fn check_mc_unbiased(_: Option<Sabotage>) -> Result<(f64, f64)> {
    let mut rng = rng_from_seed(SEED, 10);
    let fam = GaussianFamily::Full(3);
    let q = QuadraticLoss::random(3, &mut rng);
    let lambda = random_natural(fam, &mut rng);
    let exact = natgrad_exact(fam, &lambda, &q)?.tilde_lambda;
    let mc = natgrad_gaussian_identity(fam, &lambda, &q, 4000, SEED)?;
    let se = mc.std_error.expect("k > 1");
    // Largest deviation in units of standard error (exact coordinates have SE = 0).
    let z = (0..exact.len())
        .map(|i| {
            let d = (mc.tilde_lambda[i] - exact[i]).abs();
            if d <= 1e-10 * exact[i].abs().max(1.0) {
                0.0
            } else {
                d / se[i]
            }
        })
        .fold(0.0, f64::max);
    Ok((z, 4.0))
}

fn check_reparam(_: Option<Sabotage>) -> Result<(f64, f64)> {
    let mut rng = rng_from_seed(SEED, 11);
    let q = diag_quadratic(3, &mut rng);
    let m: DVector<f64> = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
    let s: DVector<f64> = DVector::from_fn(3, |_, _| rng.random_range(0.5..3.0));
    let k = 100_000;
    let mut sum = DVector::zeros(3);
    let mut sum_sq = DVector::zeros(3);
    for _ in 0..k {
        let theta = DVector::from_fn(3, |i, _| m[i] + rng.sample::<f64, _>(StandardNormal) / s[i].sqrt());
        let h = reparam_hessian_diag_estimate(&m, &s, &theta, &q.gradient(&theta));
        sum_sq += h.component_mul(&h);
        sum += h;
    }
    let kf = k as f64;
    let avg = &sum / kf;
    let z = (0..3)
        .map(|i| {
            let var = sum_sq[i] / kf - avg[i] * avg[i];
            (avg[i] - q.a[(i, i)]).abs() / (var / kf).sqrt()
        })
        .fold(0.0, f64::max);
    Ok((z, 4.0))
}

fn check_derivatives(_: Option<Sabotage>) -> Result<(f64, f64)> {
    let mut rng = rng_from_seed(SEED, 12);
    let d = ridge_synthetic(30, 3, SEED);
    let ridge = RidgeModel::new(d.x, d.y, 1.0)?;
    let fit = logistic(50, SEED)?;
    let mlp = MlpModel::new(vec![2, 5, 1], Activation::Tanh, two_spirals(40, 0.05, SEED))?;
    let mlp_loss = Penalized::new(&mlp, 1e-2);
    let theta = |p: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.5)
    };
    let checks = [
        verify_derivatives(&ridge.loss(), &theta(3, &mut rng)),
        verify_derivatives(&Penalized::new(&ridge, 1.0), &theta(3, &mut rng)),
        verify_derivatives(&Penalized::new(&fit, 1.0), &theta(2, &mut rng)),
        verify_derivatives(&mlp_loss, &mlp.init_params(1)),
    ];
    if let Some(c) = checks.iter().find(|c| !c.passed()) {
        return Ok((c.gradient_rel_err.max(c.hessian_rel_err.unwrap_or(0.0)), 1e-4));
    }
    let worst = checks.iter().map(|c| c.gradient_rel_err).fold(0.0, f64::max);
    Ok((worst, 1e-4))
}

fn check_von_blr(_: Option<Sabotage>) -> Result<(f64, f64)> {
    let mut rng = rng_from_seed(SEED, 13);
    let q = diag_quadratic(3, &mut rng);
    let fam = GaussianFamily::Diagonal(3);
    let m0 = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
    let s0 = DVector::from_element(3, 0.7);
    let mut von = VonState::new(m0.clone(), s0.clone())?;
    let mut vcfg = VonConfig::new(0.4, 1, 0);
    vcfg.expectation = VonExpectation::Exact;
    let blr_cfg = BlrConfig::new(RhoSchedule::constant(0.4), Estimator::Exact);
    let mut blr = BlrState::new(fam, fam.moment_to_natural(&crate::gaussian::GaussianMoment::diagonal(m0, s0))?)?;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        von = von_step(&von, &q, &vcfg, None)?;
        blr = blr_step(fam, &blr, &q, &blr_cfg)?;
        let moment = fam.natural_to_moment(&blr.lambda)?;
        worst = worst.max(rel_norm_diff(&von.m, &moment.mean));
        let s = match moment.precision {
            crate::gaussian::Precision::Diagonal(s) => s,
            crate::gaussian::Precision::Full(s) => s.diagonal(),
        };
        worst = worst.max(rel_norm_diff(&von.s, &s));
    }
    Ok((worst, 1e-10))
}

fn check_rmsprop_reduction(_: Option<Sabotage>) -> Result<(f64, f64)> {
    let mut rng = rng_from_seed(SEED, 14);
    let q = diag_quadratic(4, &mut rng);
    let rcfg = RmspropConfig { lr: 0.05, beta: 0.1, damping: 1e-8 };
    let mut vcfg = VonConfig::new(rcfg.beta, 1, 0);
    vcfg.expectation = VonExpectation::AtMean;
    vcfg.curvature = Curvature::SquaredGradient;
    vcfg.sqrt_scale = true;
    vcfg.lr = Some(rcfg.lr);
    vcfg.damping = rcfg.damping;
    let theta0 = DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
    let mut r = RmspropState::new(theta0.clone());
    let mut v = VonState { m: theta0, s: DVector::zeros(4), t: 0 };
    for _ in 0..25 {
        r = rmsprop_step(&r, &q.gradient(&r.theta), &rcfg);
        v = von_step(&v, &q, &vcfg, None)?;
        if r.theta != v.m || r.v != v.s {
            return Ok(((&r.theta - &v.m).amax().max(f64::MIN_POSITIVE), 0.0));
        }
    }
    Ok((0.0, 0.0))
}

fn check_ivon_positive(_: Option<Sabotage>) -> Result<(f64, f64)> {
    let fit = logistic(100, SEED + 2)?;
    let cfg = IvonConfig { seed: 5, beta2: 0.999, hess_init: 0.05, ..IvonConfig::new(0.05, 100.0) };
    let mut state = IvonState::new(DVector::zeros(2), &cfg);
    let batch: Vec<usize> = (0..100).collect();
    let mut min_h = f64::INFINITY;
    for _ in 0..2000 {
        state = ivon_step(&state, &fit, &batch[..10 + state.t % 90], &cfg)?;
        min_h = min_h.min(state.min_shifted_hessian(&cfg));
    }
    // Pass iff every shifted Hessian stayed positive.
    Ok((if min_h > 0.0 { 0.0 } else { -min_h + 1.0 }, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scope_names_round_trip() {
        for name in Scope::NAMES {
            assert_eq!(name.parse::<Scope>().unwrap().to_string(), name);
        }
        assert!("nope".parse::<Scope>().is_err());
    }

    #[test]
    fn conjugate_scope_runs_only_conjugacy_checks() {
        let r = verify_suite(Scope::Conjugate, None);
        let ids: Vec<_> = r.checks.iter().map(|c| c.id).collect();
        assert_eq!(ids, ["linear_loss", "one_step_bayes"]);
        assert!(r.passed(), "{}", r.table());
    }
}
