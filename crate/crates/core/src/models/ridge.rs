use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianFamily, GaussianMoment};
use crate::models::{DataFit, QuadraticLoss};

/// Linear-Gaussian regression `y ~ N(Xθ, I)` with prior `θ ~ N(0, τ⁻¹ I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub prior_precision: f64,
}

impl RidgeModel {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, prior_precision: f64) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::Config("ridge model needs N >= 1 and P >= 1".into()));
        }
        if x.nrows() != y.len() {
            return Err(Error::Dimension { expected: x.nrows(), got: y.len() });
        }
        if !(prior_precision > 0.0) || x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Config("ridge model needs finite data and prior precision > 0".into()));
        }
        Ok(Self { x, y, prior_precision })
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// The full negative log-joint `½‖y − Xθ‖² + ½τ‖θ‖²` (Gaussian constants dropped).
    pub fn loss(&self) -> QuadraticLoss {
        let p = self.dim();
        let a = self.x.transpose() * &self.x + DMatrix::identity(p, p) * self.prior_precision;
        QuadraticLoss::new(a, self.x.transpose() * &self.y, 0.5 * self.y.norm_squared())
    }

    /// Gaussian log-likelihood `log N(y | Xθ, I)`.
    pub fn log_likelihood(&self, theta: &DVector<f64>) -> f64 {
        let r = &self.y - &self.x * theta;
        -0.5 * r.norm_squared() - 0.5 * self.y.len() as f64 * (2.0 * std::f64::consts::PI).ln()
    }
}

impl DataFit for RidgeModel {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn num_data(&self) -> usize {
        self.x.nrows()
    }

    fn batch_value(&self, theta: &DVector<f64>, batch: &[usize]) -> f64 {
        let total: f64 = batch.iter().map(|&i| 0.5 * (self.y[i] - self.x.row(i).dot(&theta.transpose())).powi(2)).sum();
        total / batch.len() as f64
    }

    fn batch_gradient(&self, theta: &DVector<f64>, batch: &[usize]) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim());
        for &i in batch {
            let row = self.x.row(i).transpose();
            let r = row.dot(theta) - self.y[i];
            g += row * r;
        }
        g / batch.len() as f64
    }

    fn batch_hessian(&self, _theta: &DVector<f64>, batch: &[usize]) -> Option<DMatrix<f64>> {
        let p = self.dim();
        let mut h = DMatrix::zeros(p, p);
        for &i in batch {
            let row = self.x.row(i).transpose();
            h += &row * row.transpose();
        }
        Some(h / batch.len() as f64)
    }
}

/// `S* = XᵀX + τI` and `m* = S*⁻¹Xᵀy` from a direct dense solve.
pub fn ridge_exact_posterior(model: &RidgeModel) -> Result<GaussianMoment> {
    let p = model.dim();
    let precision = model.x.transpose() * &model.x + DMatrix::identity(p, p) * model.prior_precision;
    let rhs = model.x.transpose() * &model.y;
    let mean = precision.clone().lu().solve(&rhs).ok_or(Error::SingularSystem)?;
    Ok(GaussianMoment::full(mean, precision))
}

/// `(λ̃_lik, λ̃_prior) = ((Xᵀy, −½XᵀX), (0, −½τI))` in the full-Gaussian layout.
pub fn ridge_natural_coefficients(model: &RidgeModel) -> (DVector<f64>, DVector<f64>) {
    let p = model.dim();
    let fam = GaussianFamily::Full(p);
    let lik = fam.pack(&(model.x.transpose() * &model.y), &(model.x.transpose() * &model.x * -0.5));
    let prior = fam.pack(&DVector::zeros(p), &(DMatrix::identity(p, p) * (-0.5 * model.prior_precision)));
    (lik, prior)
}
