//! Gauss–Hermite expectations under Gaussians, for low-dimensional checks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::cholesky;

/// Nodes and weights for `E[f(z)]`, `z ~ N(0, 1)` (probabilists' Hermite rule,
/// Golub–Welsch). Weights sum to one.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "at least one node");
        let mut jacobi = DMatrix::zeros(n, n);
        for k in 1..n {
            let b = (k as f64).sqrt();
            jacobi[(k - 1, k)] = b;
            jacobi[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> =
            (0..n).map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2))).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Self { nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1 / total).collect() }
    }

    /// Tensor-product expectation of `f(θ)` under `N(mean, cov)`.
    ///
    /// Cost is `n^P`; intended for `P ≤ 3`.
    pub fn expect<T, F>(&self, mean: &DVector<f64>, cov: &DMatrix<f64>, mut f: F) -> Result<T>
    where
        T: std::ops::AddAssign + std::ops::Mul<f64, Output = T> + Clone,
        F: FnMut(&DVector<f64>) -> T,
    {
        let p = mean.len();
        let chol = cholesky(cov).ok_or_else(|| Error::Domain("covariance not PD".into()))?;
        let l = chol.l();
        let n = self.nodes.len();
        let total = n.checked_pow(p as u32).ok_or_else(|| Error::Config("quadrature grid too large".into()))?;
        let mut idx = vec![0usize; p];
        let mut acc: Option<T> = None;
        for _ in 0..total {
            let z = DVector::from_fn(p, |i, _| self.nodes[idx[i]]);
            let w: f64 = idx.iter().map(|&i| self.weights[i]).product();
            let theta = mean + &l * z;
            let v = f(&theta) * w;
            match acc.as_mut() {
                Some(a) => *a += v,
                None => acc = Some(v),
            }
            for d in idx.iter_mut() {
                *d += 1;
                if *d < n {
                    break;
                }
                *d = 0;
            }
        }
        Ok(acc.expect("grid has at least one point"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_of_standard_normal() {
        let gh = GaussHermite::new(10);
        let m = DVector::zeros(1);
        let c = DMatrix::identity(1, 1);
        let second: f64 = gh.expect(&m, &c, |t| t[0] * t[0]).unwrap();
        let fourth: f64 = gh.expect(&m, &c, |t| t[0].powi(4)).unwrap();
        assert!((second - 1.0).abs() < 1e-13);
        assert!((fourth - 3.0).abs() < 1e-12);
    }

    #[test]
    fn correlated_second_moment() {
        let gh = GaussHermite::new(5);
        let m = DVector::from_vec(vec![1.0, -1.0]);
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let cross: f64 = gh.expect(&m, &c, |t| t[0] * t[1]).unwrap();
        assert!((cross - (0.6 - 1.0)).abs() < 1e-12);
    }
}
