//! Full- and diagonal-covariance Gaussian families in precision form.
//!
//! Coordinate layout, for dimension `P`:
//!
//! * full: `λ = (S m, upper(−½S))` where `upper` lists the upper triangle row-major
//!   with off-diagonal entries doubled, and `T(θ) = (θ, θ_i θ_j for i ≤ j)`.
//!   With this layout `⟨λ, T(θ)⟩ = mᵀSθ − ½θᵀSθ` is a plain dot product.
//! * diagonal: `λ = (s ⊙ m, −½s)` and `T(θ) = (θ, θ²)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expfam::{ExpectationParams, ExponentialFamily, FisherMatrix, NaturalParams, SufficientStats};
use crate::linalg::{self, cholesky, flatten_upper, sym_len, unflatten_upper, upper_pairs};

/// Identifier of the random-number generator used for every sampled quantity.
pub const RNG_ALGORITHM: &str = "chacha8";

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Seeded generator; `stream` selects an independent sub-sequence (e.g. the iteration index).
pub fn rng_from_seed(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "covariance", content = "dim")]
pub enum GaussianFamily {
    Full(usize),
    Diagonal(usize),
}

/// Precision of a Gaussian in moment form.
#[derive(Debug, Clone, PartialEq)]
pub enum Precision {
    Full(DMatrix<f64>),
    Diagonal(DVector<f64>),
}

impl Precision {
    pub fn to_matrix(&self) -> DMatrix<f64> {
        match self {
            Precision::Full(s) => s.clone(),
            Precision::Diagonal(s) => DMatrix::from_diagonal(s),
        }
    }
}

/// Mean and precision `(m, S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoment {
    pub mean: DVector<f64>,
    pub precision: Precision,
}

impl GaussianMoment {
    pub fn full(mean: DVector<f64>, precision: DMatrix<f64>) -> Self {
        Self { mean, precision: Precision::Full(precision) }
    }

    pub fn diagonal(mean: DVector<f64>, precision: DVector<f64>) -> Self {
        Self { mean, precision: Precision::Diagonal(precision) }
    }

    pub fn family(&self) -> GaussianFamily {
        match self.precision {
            Precision::Full(_) => GaussianFamily::Full(self.mean.len()),
            Precision::Diagonal(_) => GaussianFamily::Diagonal(self.mean.len()),
        }
    }

    /// `Σ = S⁻¹`.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        match &self.precision {
            Precision::Full(s) => {
                let chol = cholesky(s).ok_or_else(|| Error::Domain("precision not PD".into()))?;
                let mut cov = chol.inverse();
                linalg::symmetrize(&mut cov);
                Ok(cov)
            }
            Precision::Diagonal(s) => {
                if s.iter().all(|v| *v > 0.0 && v.is_finite()) {
                    Ok(DMatrix::from_diagonal(&s.map(|v| 1.0 / v)))
                } else {
                    Err(Error::Domain("diagonal precision must be positive".into()))
                }
            }
        }
    }
}

/// `K` draws stored column-wise, with the seed that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSampleBatch {
    pub samples: DMatrix<f64>,
    pub seed: u64,
}

impl GaussianSampleBatch {
    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    pub fn sample(&self, k: usize) -> DVector<f64> {
        self.samples.column(k).into_owned()
    }
}

/// Internal parsed state of a natural parameter vector.
struct Parsed {
    mean: DVector<f64>,
    /// `(S m)` as stored.
    eta: DVector<f64>,
    kind: ParsedPrecision,
}

enum ParsedPrecision {
    Full { chol: nalgebra::Cholesky<f64, nalgebra::Dyn>, cov: DMatrix<f64> },
    Diagonal { s: DVector<f64> },
}

impl GaussianFamily {
    pub fn dim(&self) -> usize {
        match *self {
            GaussianFamily::Full(p) | GaussianFamily::Diagonal(p) => p,
        }
    }

    pub fn is_full(&self) -> bool {
        matches!(self, GaussianFamily::Full(_))
    }

    /// Length of the quadratic block.
    fn quad_len(&self) -> usize {
        match *self {
            GaussianFamily::Full(p) => sym_len(p),
            GaussianFamily::Diagonal(p) => p,
        }
    }

    fn parse(&self, lambda: &NaturalParams) -> Result<Parsed> {
        self.check_dim(lambda)?;
        let p = self.dim();
        let eta = lambda.rows(0, p).into_owned();
        let quad = lambda.rows(p, self.quad_len());
        match self {
            GaussianFamily::Full(_) => {
                let s = unflatten_upper(quad.as_slice(), p, 2.0) * -2.0;
                let chol =
                    cholesky(&s).ok_or_else(|| Error::Domain("precision block is not positive-definite".into()))?;
                let mean = chol.solve(&eta);
                let mut cov = chol.inverse();
                linalg::symmetrize(&mut cov);
                Ok(Parsed { mean, eta, kind: ParsedPrecision::Full { chol, cov } })
            }
            GaussianFamily::Diagonal(_) => {
                let s = quad.map(|v| -2.0 * v);
                if s.iter().any(|v| *v <= 0.0) {
                    return Err(Error::Domain("diagonal precision must be positive".into()));
                }
                let mean = eta.component_div(&s);
                Ok(Parsed { mean, eta, kind: ParsedPrecision::Diagonal { s } })
            }
        }
    }

    /// `λ = (S m, −½S)` in this family's layout.
    pub fn moment_to_natural(&self, moment: &GaussianMoment) -> Result<NaturalParams> {
        let p = self.dim();
        if moment.mean.len() != p {
            return Err(Error::Dimension { expected: p, got: moment.mean.len() });
        }
        let mut coords = Vec::with_capacity(self.param_dim());
        match (self, &moment.precision) {
            (GaussianFamily::Full(_), Precision::Full(s)) => {
                if cholesky(s).is_none() || (s - s.transpose()).amax() > 1e-12 * s.amax().max(1.0) {
                    return Err(Error::Domain("precision is not symmetric positive-definite".into()));
                }
                coords.extend((s * &moment.mean).iter());
                coords.extend(flatten_upper(&(s * -0.5), 2.0));
            }
            (GaussianFamily::Full(_), Precision::Diagonal(s)) => {
                return self.moment_to_natural(&GaussianMoment::full(moment.mean.clone(), DMatrix::from_diagonal(s)));
            }
            (GaussianFamily::Diagonal(_), Precision::Diagonal(s)) => {
                if s.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                    return Err(Error::Domain("diagonal precision must be positive".into()));
                }
                coords.extend(s.component_mul(&moment.mean).iter());
                coords.extend(s.iter().map(|v| -0.5 * v));
            }
            (GaussianFamily::Diagonal(_), Precision::Full(_)) => {
                return Err(Error::FamilyMismatch { left: self.name(), right: "full-covariance moment".into() });
            }
        }
        NaturalParams::new(DVector::from_vec(coords))
    }

    pub fn natural_to_moment(&self, lambda: &NaturalParams) -> Result<GaussianMoment> {
        let parsed = self.parse(lambda)?;
        Ok(match parsed.kind {
            ParsedPrecision::Full { .. } => {
                let p = self.dim();
                let s = unflatten_upper(lambda.rows(p, self.quad_len()).as_slice(), p, 2.0) * -2.0;
                GaussianMoment::full(parsed.mean, s)
            }
            ParsedPrecision::Diagonal { s } => GaussianMoment::diagonal(parsed.mean, s),
        })
    }

    pub fn mean(&self, lambda: &NaturalParams) -> Result<DVector<f64>> {
        Ok(self.parse(lambda)?.mean)
    }

    pub fn covariance(&self, lambda: &NaturalParams) -> Result<DMatrix<f64>> {
        let parsed = self.parse(lambda)?;
        Ok(match parsed.kind {
            ParsedPrecision::Full { cov, .. } => cov,
            ParsedPrecision::Diagonal { s } => DMatrix::from_diagonal(&s.map(|v| 1.0 / v)),
        })
    }

    /// Packs a linear block `a` and a symmetric matrix `w` so that
    /// `⟨coords, T(θ)⟩ = aᵀθ + θᵀWθ`. The diagonal family keeps only `diag(W)`.
    pub fn pack(&self, linear: &DVector<f64>, quadratic: &DMatrix<f64>) -> DVector<f64> {
        let mut coords: Vec<f64> = linear.iter().copied().collect();
        match self {
            GaussianFamily::Full(_) => coords.extend(flatten_upper(quadratic, 2.0)),
            GaussianFamily::Diagonal(_) => coords.extend(quadratic.diagonal().iter()),
        }
        DVector::from_vec(coords)
    }

    /// Inverse of [`Self::pack`].
    pub fn unpack(&self, coords: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.dim();
        let linear = coords.rows(0, p).into_owned();
        let quad = coords.rows(p, self.quad_len());
        let w = match self {
            GaussianFamily::Full(_) => unflatten_upper(quad.as_slice(), p, 2.0),
            GaussianFamily::Diagonal(_) => DMatrix::from_diagonal(&quad.into_owned()),
        };
        (linear, w)
    }

    /// Draws `k` samples with a fresh generator seeded by `seed`.
    pub fn sample(&self, lambda: &NaturalParams, k: usize, seed: u64) -> Result<GaussianSampleBatch> {
        let mut rng = rng_from_seed(seed, 0);
        let samples = self.sample_with(lambda, k, &mut rng)?;
        Ok(GaussianSampleBatch { samples, seed })
    }

    /// Draws `k` samples (columns) as `m + L⁻ᵀ z` with `S = L Lᵀ`.
    pub fn sample_with<R: Rng + ?Sized>(&self, lambda: &NaturalParams, k: usize, rng: &mut R) -> Result<DMatrix<f64>> {
        if k == 0 {
            return Err(Error::Config("sample count must be at least 1".into()));
        }
        let parsed = self.parse(lambda)?;
        let p = self.dim();
        let mut out = DMatrix::zeros(p, k);
        for col in 0..k {
            let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
            let theta = match &parsed.kind {
                ParsedPrecision::Full { chol, .. } => {
                    let lt = chol.l().transpose();
                    let x = lt.solve_upper_triangular(&z).expect("Cholesky factor has a positive diagonal");
                    &parsed.mean + x
                }
                ParsedPrecision::Diagonal { s } => &parsed.mean + z.zip_map(s, |zi, si| zi / si.sqrt()),
            };
            out.set_column(col, &theta);
        }
        Ok(out)
    }
}

impl ExponentialFamily for GaussianFamily {
    fn name(&self) -> String {
        match self {
            GaussianFamily::Full(p) => format!("gaussian-full-{p}"),
            GaussianFamily::Diagonal(p) => format!("gaussian-diag-{p}"),
        }
    }

    fn theta_dim(&self) -> usize {
        self.dim()
    }

    fn param_dim(&self) -> usize {
        self.dim() + self.quad_len()
    }

    fn is_valid(&self, lambda: &NaturalParams) -> bool {
        self.parse(lambda).is_ok()
    }

    fn cumulant(&self, lambda: &NaturalParams) -> Result<f64> {
        let parsed = self.parse(lambda)?;
        let p = self.dim() as f64;
        let log_det = match &parsed.kind {
            ParsedPrecision::Full { chol, .. } => 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
            ParsedPrecision::Diagonal { s } => s.iter().map(|v| v.ln()).sum(),
        };
        Ok(0.5 * parsed.eta.dot(&parsed.mean) - 0.5 * log_det + 0.5 * p * LN_2PI)
    }

    fn natural_to_dual(&self, lambda: &NaturalParams) -> Result<ExpectationParams> {
        let parsed = self.parse(lambda)?;
        let m = &parsed.mean;
        let mut coords: Vec<f64> = m.iter().copied().collect();
        match &parsed.kind {
            ParsedPrecision::Full { cov, .. } => {
                let second = cov + m * m.transpose();
                coords.extend(flatten_upper(&second, 1.0));
            }
            ParsedPrecision::Diagonal { s } => {
                coords.extend(m.iter().zip(s.iter()).map(|(mi, si)| mi * mi + 1.0 / si));
            }
        }
        ExpectationParams::new(DVector::from_vec(coords))
    }

    fn dual_to_natural(&self, mu: &ExpectationParams) -> Result<NaturalParams> {
        self.check_dim(mu)?;
        let p = self.dim();
        let m = mu.rows(0, p).into_owned();
        let second = mu.rows(p, self.quad_len());
        match self {
            GaussianFamily::Full(_) => {
                let cov = unflatten_upper(second.as_slice(), p, 1.0) - &m * m.transpose();
                let chol = cholesky(&cov)
                    .ok_or_else(|| Error::Domain("expectation parameters imply a non-PD covariance".into()))?;
                let mut s = chol.inverse();
                linalg::symmetrize(&mut s);
                self.moment_to_natural(&GaussianMoment::full(m, s))
            }
            GaussianFamily::Diagonal(_) => {
                let var = DVector::from_fn(p, |i, _| second[i] - m[i] * m[i]);
                if var.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::Domain("expectation parameters imply non-positive variance".into()));
                }
                self.moment_to_natural(&GaussianMoment::diagonal(m, var.map(|v| 1.0 / v)))
            }
        }
    }

    /// Covariance of `T(θ)` under `q_λ`, from Isserlis' theorem.
    fn fisher(&self, lambda: &NaturalParams) -> Result<FisherMatrix> {
        let parsed = self.parse(lambda)?;
        let p = self.dim();
        let m = &parsed.mean;
        let d = self.param_dim();
        let mut f = DMatrix::zeros(d, d);
        match &parsed.kind {
            ParsedPrecision::Full { cov, .. } => {
                let c = cov;
                let pairs = upper_pairs(p);
                for a in 0..p {
                    for b in 0..p {
                        f[(a, b)] = c[(a, b)];
                    }
                    for (k, &(i, j)) in pairs.iter().enumerate() {
                        let v = m[i] * c[(a, j)] + m[j] * c[(a, i)];
                        f[(a, p + k)] = v;
                        f[(p + k, a)] = v;
                    }
                }
                for (r, &(i, j)) in pairs.iter().enumerate() {
                    for (s, &(k, l)) in pairs.iter().enumerate().skip(r) {
                        let v = c[(i, k)] * c[(j, l)]
                            + c[(i, l)] * c[(j, k)]
                            + m[i] * m[k] * c[(j, l)]
                            + m[i] * m[l] * c[(j, k)]
                            + m[j] * m[k] * c[(i, l)]
                            + m[j] * m[l] * c[(i, k)];
                        f[(p + r, p + s)] = v;
                        f[(p + s, p + r)] = v;
                    }
                }
            }
            ParsedPrecision::Diagonal { s } => {
                for i in 0..p {
                    let var = 1.0 / s[i];
                    f[(i, i)] = var;
                    let cross = 2.0 * m[i] * var;
                    f[(i, p + i)] = cross;
                    f[(p + i, i)] = cross;
                    f[(p + i, p + i)] = 2.0 * var * var + 4.0 * m[i] * m[i] * var;
                }
            }
        }
        FisherMatrix::new(f)
    }

    fn sufficient_stats(&self, theta: &DVector<f64>) -> SufficientStats {
        let mut coords: Vec<f64> = theta.iter().copied().collect();
        match self {
            GaussianFamily::Full(p) => {
                coords.extend(upper_pairs(*p).into_iter().map(|(i, j)| theta[i] * theta[j]));
            }
            GaussianFamily::Diagonal(_) => coords.extend(theta.iter().map(|v| v * v)),
        }
        SufficientStats::new(DVector::from_vec(coords)).expect("finite theta gives finite statistics")
    }

    /// Closed form `½ log|2πe S⁻¹|`.
    fn entropy(&self, lambda: &NaturalParams) -> Result<f64> {
        let parsed = self.parse(lambda)?;
        let p = self.dim() as f64;
        let log_det = match &parsed.kind {
            ParsedPrecision::Full { chol, .. } => 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
            ParsedPrecision::Diagonal { s } => s.iter().map(|v| v.ln()).sum(),
        };
        Ok(0.5 * p * (LN_2PI + 1.0) - 0.5 * log_det)
    }
}

/// Random moment pair for tests and the verification suite: mean entries in
/// `[-2, 2]`, precision `BBᵀ/P + 0.5 I` (full) or entries in `[0.5, 3]` (diagonal).
pub fn random_moment<R: Rng + ?Sized>(family: GaussianFamily, rng: &mut R) -> GaussianMoment {
    let p = family.dim();
    let mean = DVector::from_fn(p, |_, _| rng.random_range(-2.0..2.0));
    match family {
        GaussianFamily::Full(_) => {
            let b = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
            let mut s = &b * b.transpose() / p as f64 + DMatrix::identity(p, p) * 0.5;
            linalg::symmetrize(&mut s);
            GaussianMoment::full(mean, s)
        }
        GaussianFamily::Diagonal(_) => {
            GaussianMoment::diagonal(mean, DVector::from_fn(p, |_, _| rng.random_range(0.5..3.0)))
        }
    }
}

/// Random valid natural parameters; see [`random_moment`].
pub fn random_natural<R: Rng + ?Sized>(family: GaussianFamily, rng: &mut R) -> NaturalParams {
    family.moment_to_natural(&random_moment(family, rng)).expect("random moment is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn nat(v: &[f64]) -> NaturalParams {
        NaturalParams::from_slice(v).unwrap()
    }

    #[test]
    fn standard_normal_cumulant_and_moments() {
        let fam = GaussianFamily::Full(1);
        let l = nat(&[0.0, -0.5]);
        assert_relative_eq!(fam.cumulant(&l).unwrap(), 0.5 * LN_2PI, epsilon = 1e-15);
        let mu = fam.natural_to_dual(&l).unwrap();
        assert_eq!(mu.as_slice(), &[0.0, 1.0]);
        let mu = fam.natural_to_dual(&nat(&[2.0, -1.0])).unwrap();
        assert_relative_eq!(mu[0], 1.0);
        assert_relative_eq!(mu[1], 1.5);
    }

    #[test]
    fn invalid_precision_is_domain_error() {
        let fam = GaussianFamily::Full(1);
        assert!(matches!(fam.cumulant(&nat(&[0.0, 0.5])), Err(Error::Domain(_))));
        let d = GaussianFamily::Diagonal(1);
        assert!(matches!(d.cumulant(&nat(&[0.0, 0.0])), Err(Error::Domain(_))));
        let mu = ExpectationParams::from_slice(&[1.0, 0.5]).unwrap();
        assert!(matches!(fam.dual_to_natural(&mu), Err(Error::Domain(_))));
        assert!(matches!(d.dual_to_natural(&mu), Err(Error::Domain(_))));
    }

    #[test]
    fn standard_normal_fisher_and_entropy() {
        let fam = GaussianFamily::Full(1);
        let l = nat(&[0.0, -0.5]);
        let f = fam.fisher(&l).unwrap();
        assert_eq!(f.matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]));
        let h = 0.5 * (LN_2PI + 1.0);
        assert_relative_eq!(fam.entropy(&l).unwrap(), 1.418_938_533_204_672_7, epsilon = 1e-12);
        let var4 =
            fam.moment_to_natural(&GaussianMoment::full(DVector::zeros(1), DMatrix::from_element(1, 1, 0.25))).unwrap();
        assert_relative_eq!(fam.entropy(&var4).unwrap(), h + 0.5 * 4f64.ln(), epsilon = 1e-12);
        assert_eq!(fam.entropy_gradient(&l).unwrap().as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn moment_to_natural_layout() {
        let fam = GaussianFamily::Full(2);
        let l = fam.moment_to_natural(&GaussianMoment::full(DVector::zeros(2), DMatrix::identity(2, 2))).unwrap();
        assert_eq!(l.as_slice(), &[0.0, 0.0, -0.5, 0.0, -0.5]);
        let one = GaussianFamily::Full(1)
            .moment_to_natural(&GaussianMoment::full(DVector::from_element(1, 1.0), DMatrix::from_element(1, 1, 2.0)))
            .unwrap();
        assert_eq!(one.as_slice(), &[2.0, -1.0]);
    }

    #[test]
    fn quadratic_form_reproduced_by_dot_product() {
        let mut rng = rng_from_seed(3, 0);
        for fam in [GaussianFamily::Full(4), GaussianFamily::Diagonal(4)] {
            let mo = random_moment(fam, &mut rng);
            let l = fam.moment_to_natural(&mo).unwrap();
            let s = mo.precision.to_matrix();
            let theta = DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
            let direct = (mo.mean.transpose() * &s * &theta)[0] - 0.5 * (theta.transpose() * &s * &theta)[0];
            let dot = l.dot(&fam.sufficient_stats(&theta));
            assert!((direct - dot).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let fam = GaussianFamily::Full(3);
        let mut rng = rng_from_seed(5, 0);
        let l = random_natural(fam, &mut rng);
        let a = fam.sample(&l, 16, 99).unwrap();
        let b = fam.sample(&l, 16, 99).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, fam.sample(&l, 16, 100).unwrap());
        assert!(fam.sample(&l, 0, 1).is_err());
    }

    #[test]
    fn pack_unpack_roundtrip() {
        let fam = GaussianFamily::Full(3);
        let a = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let w = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.2, 0.5, 2.0, -0.1, 0.2, -0.1, 3.0]);
        let (a2, w2) = fam.unpack(&fam.pack(&a, &w));
        assert_eq!(a, a2);
        assert_relative_eq!(w, w2, epsilon = 1e-15);
    }
}
