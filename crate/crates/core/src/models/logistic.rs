use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::DataFit;

/// Binary logistic regression; labels in `{0, 1}`. The prior lives in
/// [`Penalized`](crate::models::Penalized).
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + eᶻ)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl LogisticModel {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Dimension { expected: x.nrows(), got: y.len() });
        }
        if y.iter().any(|v| *v != 0.0 && *v != 1.0) {
            return Err(Error::Config("logistic labels must be 0 or 1".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("logistic features must be finite".into()));
        }
        Ok(Self { x, y })
    }

    fn logit(&self, i: usize, theta: &DVector<f64>) -> f64 {
        self.x.row(i).transpose().dot(theta)
    }
}

impl DataFit for LogisticModel {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn num_data(&self) -> usize {
        self.x.nrows()
    }

    fn batch_value(&self, theta: &DVector<f64>, batch: &[usize]) -> f64 {
        let total: f64 = batch
            .iter()
            .map(|&i| {
                let z = self.logit(i, theta);
                softplus(z) - self.y[i] * z
            })
            .sum();
        total / batch.len() as f64
    }

    fn batch_gradient(&self, theta: &DVector<f64>, batch: &[usize]) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim());
        for &i in batch {
            let r = sigmoid(self.logit(i, theta)) - self.y[i];
            g += self.x.row(i).transpose() * r;
        }
        g / batch.len() as f64
    }

    fn batch_hessian(&self, theta: &DVector<f64>, batch: &[usize]) -> Option<DMatrix<f64>> {
        let p = self.dim();
        let mut h = DMatrix::zeros(p, p);
        for &i in batch {
            let s = sigmoid(self.logit(i, theta));
            let row = self.x.row(i).transpose();
            h += &row * row.transpose() * (s * (1.0 - s));
        }
        Some(h / batch.len() as f64)
    }

    fn batch_hessian_diag(&self, theta: &DVector<f64>, batch: &[usize]) -> Option<DVector<f64>> {
        let mut h = DVector::zeros(self.dim());
        for &i in batch {
            let s = sigmoid(self.logit(i, theta));
            let row = self.x.row(i).transpose();
            h += row.component_mul(&row) * (s * (1.0 - s));
        }
        Some(h / batch.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((sigmoid(-800.0)).abs() < 1e-300);
    }

    #[test]
    fn rejects_non_binary_labels() {
        assert!(LogisticModel::new(DMatrix::zeros(2, 1), DVector::from_vec(vec![0.0, 0.5])).is_err());
    }
}
