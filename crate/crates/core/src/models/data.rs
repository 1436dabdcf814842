//! Seeded synthetic datasets. Each generator uses its own RNG stream so datasets
//! stay fixed when optimizer seeds change.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::gaussian::rng_from_seed;

const DATA_STREAM: u64 = 0xDA7A;

/// Spiral arm length in turns.
pub const SPIRAL_TURNS: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

/// `X` and true weights standard normal, `y = Xθ + ε` with unit noise.
pub fn ridge_synthetic(n: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = rng_from_seed(seed, DATA_STREAM);
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let w = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let noise = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = &x * w + noise;
    Dataset { x, y }
}

/// Labels from a random separating hyperplane through the origin, each flipped
/// with probability `flip`.
pub fn logistic_synthetic(n: usize, p: usize, flip: f64, seed: u64) -> Dataset {
    let mut rng = rng_from_seed(seed, DATA_STREAM);
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let w = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = DVector::from_fn(n, |i, _| {
        let positive = x.row(i).transpose().dot(&w) > 0.0;
        let flipped = rng.random::<f64>() < flip;
        if positive != flipped {
            1.0
        } else {
            0.0
        }
    });
    Dataset { x, y }
}

/// Two interleaved spirals in the plane, `n / 2` points per class, with
/// isotropic Gaussian jitter of standard deviation `noise`.
pub fn two_spirals(n: usize, noise: f64, seed: u64) -> Dataset {
    let mut rng = rng_from_seed(seed, DATA_STREAM);
    let half = n / 2;
    let mut x = DMatrix::zeros(n, 2);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let class = if i < half { 0.0 } else { 1.0 };
        let k = if i < half { i } else { i - half };
        let count = if i < half { half } else { n - half };
        let t = 0.1 + 0.9 * (k as f64 + 0.5) / count as f64;
        let phi = 2.0 * std::f64::consts::PI * SPIRAL_TURNS * t;
        let sign = if class == 0.0 { 1.0 } else { -1.0 };
        x[(i, 0)] = sign * t * phi.cos() + noise * rng.sample::<f64, _>(StandardNormal);
        x[(i, 1)] = sign * t * phi.sin() + noise * rng.sample::<f64, _>(StandardNormal);
        y[i] = class;
    }
    Dataset { x, y }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(ridge_synthetic(10, 3, 1), ridge_synthetic(10, 3, 1));
        assert_ne!(ridge_synthetic(10, 3, 1), ridge_synthetic(10, 3, 2));
        assert_eq!(logistic_synthetic(20, 2, 0.1, 5), logistic_synthetic(20, 2, 0.1, 5));
        let s = two_spirals(500, 0.02, 0);
        assert_eq!(s.y.iter().filter(|v| **v == 1.0).count(), 250);
    }
}
