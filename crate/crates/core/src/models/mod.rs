//! Loss models with exact or checkable derivatives, and seeded synthetic datasets.

mod data;
mod logistic;
mod mlp;
mod quadratic;
mod ridge;

pub use data::{logistic_synthetic, ridge_synthetic, two_spirals, Dataset};
pub use logistic::LogisticModel;
pub use mlp::{Activation, MlpModel};
pub use quadratic::QuadraticLoss;
pub use ridge::{ridge_exact_posterior, ridge_natural_coefficients, RidgeModel};

use nalgebra::{DMatrix, DVector};

use crate::natgrad::LossModel;

/// A per-example data-fit term: losses are means over the selected examples.
pub trait DataFit: Sync {
    fn dim(&self) -> usize;

    fn num_data(&self) -> usize;

    fn batch_value(&self, theta: &DVector<f64>, batch: &[usize]) -> f64;

    fn batch_gradient(&self, theta: &DVector<f64>, batch: &[usize]) -> DVector<f64>;

    fn batch_hessian(&self, _theta: &DVector<f64>, _batch: &[usize]) -> Option<DMatrix<f64>> {
        None
    }

    fn batch_hessian_diag(&self, theta: &DVector<f64>, batch: &[usize]) -> Option<DVector<f64>> {
        self.batch_hessian(theta, batch).map(|h| h.diagonal())
    }

    fn all(&self) -> Vec<usize> {
        (0..self.num_data()).collect()
    }

    fn mean_value(&self, theta: &DVector<f64>) -> f64 {
        self.batch_value(theta, &self.all())
    }
}

/// `ℓ̄(θ) = N · mean_i ℓ_i(θ) + ½ τ ‖θ‖²`: the negative log-joint of a
/// per-example likelihood and an isotropic Gaussian prior with precision `τ`.
#[derive(Debug, Clone)]
pub struct Penalized<D> {
    pub data: D,
    pub prior_precision: f64,
}

impl<D: DataFit> Penalized<D> {
    pub fn new(data: D, prior_precision: f64) -> Self {
        Self { data, prior_precision }
    }

    fn n(&self) -> f64 {
        self.data.num_data() as f64
    }
}

impl<D: DataFit> LossModel for Penalized<D> {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn value(&self, theta: &DVector<f64>) -> f64 {
        self.n() * self.data.mean_value(theta) + 0.5 * self.prior_precision * theta.norm_squared()
    }

    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        self.batch_gradient(theta, &self.data.all())
    }

    fn hessian_full(&self, theta: &DVector<f64>) -> Option<DMatrix<f64>> {
        let p = self.dim();
        self.data
            .batch_hessian(theta, &self.data.all())
            .map(|h| h * self.n() + DMatrix::identity(p, p) * self.prior_precision)
    }

    fn hessian_diag(&self, theta: &DVector<f64>) -> Option<DVector<f64>> {
        self.batch_hessian_diag(theta, &self.data.all())
    }

    fn num_data(&self) -> usize {
        self.data.num_data()
    }

    fn batch_gradient(&self, theta: &DVector<f64>, batch: &[usize]) -> DVector<f64> {
        self.data.batch_gradient(theta, batch) * self.n() + theta * self.prior_precision
    }

    fn batch_hessian_diag(&self, theta: &DVector<f64>, batch: &[usize]) -> Option<DVector<f64>> {
        self.data
            .batch_hessian_diag(theta, batch)
            .map(|h| h * self.n() + DVector::from_element(self.dim(), self.prior_precision))
    }
}

impl<T: DataFit + ?Sized> DataFit for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn num_data(&self) -> usize {
        (**self).num_data()
    }
    fn batch_value(&self, theta: &DVector<f64>, batch: &[usize]) -> f64 {
        (**self).batch_value(theta, batch)
    }
    fn batch_gradient(&self, theta: &DVector<f64>, batch: &[usize]) -> DVector<f64> {
        (**self).batch_gradient(theta, batch)
    }
    fn batch_hessian(&self, theta: &DVector<f64>, batch: &[usize]) -> Option<DMatrix<f64>> {
        (**self).batch_hessian(theta, batch)
    }
    fn batch_hessian_diag(&self, theta: &DVector<f64>, batch: &[usize]) -> Option<DVector<f64>> {
        (**self).batch_hessian_diag(theta, batch)
    }
}

/// A quadratic viewed as a single-example data term (the batch is ignored).
impl DataFit for QuadraticLoss {
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn num_data(&self) -> usize {
        1
    }
    fn batch_value(&self, theta: &DVector<f64>, _batch: &[usize]) -> f64 {
        LossModel::value(self, theta)
    }
    fn batch_gradient(&self, theta: &DVector<f64>, _batch: &[usize]) -> DVector<f64> {
        LossModel::gradient(self, theta)
    }
    fn batch_hessian(&self, _theta: &DVector<f64>, _batch: &[usize]) -> Option<DMatrix<f64>> {
        Some(self.a.clone())
    }
}
