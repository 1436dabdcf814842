use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::gaussian::GaussianFamily;
use crate::linalg;
use crate::natgrad::{GaussianExpectations, LossModel};

/// `ℓ̄(θ) = ½ θᵀAθ − bᵀθ + c` with symmetric `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticLoss {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: f64,
}

impl QuadraticLoss {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: f64) -> Self {
        assert_eq!(a.nrows(), b.len());
        assert!(a.is_square());
        Self { a, b, c }
    }

    /// The loss `−⟨coeff, T(θ)⟩` for a packed coefficient vector.
    pub fn from_natural_coefficients(family: GaussianFamily, coeff: &DVector<f64>) -> Self {
        let (linear, w) = family.unpack(coeff);
        Self::new(w * -2.0, linear, 0.0)
    }

    /// Random PD `A = BBᵀ/P + 0.5 I` and `b` in `[-2, 2]`.
    pub fn random<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Self {
        let bm = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
        let mut a = &bm * bm.transpose() / p as f64 + DMatrix::identity(p, p) * 0.5;
        linalg::symmetrize(&mut a);
        let b = DVector::from_fn(p, |_, _| rng.random_range(-2.0..2.0));
        Self::new(a, b, 0.0)
    }

    /// Separable `½ Σ aᵢθᵢ² − bᵀθ`.
    pub fn diagonal(a: DVector<f64>, b: DVector<f64>) -> Self {
        Self::new(DMatrix::from_diagonal(&a), b, 0.0)
    }

    pub fn minimizer(&self) -> Option<DVector<f64>> {
        self.a.clone().lu().solve(&self.b)
    }
}

impl LossModel for QuadraticLoss {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, theta: &DVector<f64>) -> f64 {
        0.5 * theta.dot(&(&self.a * theta)) - self.b.dot(theta) + self.c
    }

    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.a * theta - &self.b
    }

    fn hessian_full(&self, _theta: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.a.clone())
    }

    fn gaussian_expectations(&self, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Option<GaussianExpectations> {
        let value = 0.5 * (&self.a * cov).trace() + self.value(mean);
        Some(GaussianExpectations { value, gradient: self.gradient(mean), hessian: self.a.clone() })
    }

    fn natural_coefficients(&self, family: GaussianFamily) -> Option<DVector<f64>> {
        if family.dim() != self.dim() {
            return None;
        }
        if !family.is_full() {
            let p = self.dim();
            let off_diag = (0..p).any(|i| (0..p).any(|j| i != j && self.a[(i, j)] != 0.0));
            if off_diag {
                return None;
            }
        }
        Some(family.pack(&self.b, &(&self.a * -0.5)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expfam::ExponentialFamily;
    use crate::gaussian::rng_from_seed;

    #[test]
    fn coefficients_reproduce_loss_up_to_constant() {
        let mut rng = rng_from_seed(2, 0);
        let q = QuadraticLoss::random(3, &mut rng);
        let fam = GaussianFamily::Full(3);
        let coeff = q.natural_coefficients(fam).unwrap();
        let offsets: Vec<f64> = (0..10)
            .map(|_| {
                let t = DVector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
                q.value(&t) + coeff.dot(&fam.sufficient_stats(&t))
            })
            .collect();
        let spread =
            offsets.iter().cloned().fold(f64::MIN, f64::max) - offsets.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-12);
        assert_eq!(QuadraticLoss::from_natural_coefficients(fam, &coeff).natural_coefficients(fam).unwrap(), coeff);
    }

    #[test]
    fn diagonal_family_needs_diagonal_curvature() {
        let mut rng = rng_from_seed(4, 0);
        let q = QuadraticLoss::random(2, &mut rng);
        assert!(q.natural_coefficients(GaussianFamily::Diagonal(2)).is_none());
        let d = QuadraticLoss::diagonal(DVector::from_vec(vec![1.0, 2.0]), DVector::zeros(2));
        assert!(d.natural_coefficients(GaussianFamily::Diagonal(2)).is_some());
    }
}
