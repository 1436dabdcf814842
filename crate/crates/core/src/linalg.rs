//! Dense linear-algebra helpers and the finite-difference defaults shared by
//! every numerical checker in the crate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Relative step used by all central-difference oracles.
pub const FD_REL_STEP: f64 = 1e-5;

/// Central-difference step for a coordinate of magnitude `x`.
pub fn fd_step(x: f64) -> f64 {
    FD_REL_STEP * x.abs().max(1.0)
}

/// Central-difference gradient of a scalar function.
pub fn central_gradient<F>(f: F, x: &DVector<f64>) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let mut g = DVector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let h = fd_step(x[i]);
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
    }
    g
}

/// Central-difference Jacobian of a vector function; column `j` holds d f / d x_j.
pub fn central_jacobian<F>(f: F, x: &DVector<f64>) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n_out = f(x).len();
    let mut jac = DMatrix::zeros(n_out, x.len());
    let mut probe = x.clone();
    for j in 0..x.len() {
        let h = fd_step(x[j]);
        probe[j] = x[j] + h;
        let up = f(&probe);
        probe[j] = x[j] - h;
        let down = f(&probe);
        probe[j] = x[j];
        jac.set_column(j, &((up - down) / (2.0 * h)));
    }
    jac
}

/// Cholesky factorization of a symmetric matrix; `None` unless strictly positive-definite.
pub fn cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if !m.is_square() || m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Cholesky::new(m.clone())
}

/// Number of free entries in a symmetric `p x p` matrix.
pub fn sym_len(p: usize) -> usize {
    p * (p + 1) / 2
}

/// Upper triangle, row-major. Off-diagonal entries are multiplied by `offdiag_scale`.
pub fn flatten_upper(m: &DMatrix<f64>, offdiag_scale: f64) -> Vec<f64> {
    let p = m.nrows();
    let mut out = Vec::with_capacity(sym_len(p));
    for i in 0..p {
        out.push(m[(i, i)]);
        for j in (i + 1)..p {
            out.push(offdiag_scale * m[(i, j)]);
        }
    }
    out
}

/// Inverse of [`flatten_upper`]: rebuilds the symmetric matrix, dividing
/// off-diagonal entries by `offdiag_scale`.
pub fn unflatten_upper(coords: &[f64], p: usize, offdiag_scale: f64) -> DMatrix<f64> {
    debug_assert_eq!(coords.len(), sym_len(p));
    let mut m = DMatrix::zeros(p, p);
    let mut k = 0;
    for i in 0..p {
        m[(i, i)] = coords[k];
        k += 1;
        for j in (i + 1)..p {
            let v = coords[k] / offdiag_scale;
            m[(i, j)] = v;
            m[(j, i)] = v;
            k += 1;
        }
    }
    m
}

/// Index pairs `(i, j)`, `i <= j`, in the order used by [`flatten_upper`].
pub fn upper_pairs(p: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(sym_len(p));
    for i in 0..p {
        for j in i..p {
            out.push((i, j));
        }
    }
    out
}

/// `|a - b| / max(1, |b|)` taken elementwise, maximum over entries.
pub fn max_rel_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs() / y.abs().max(1.0)).fold(0.0, f64::max)
}

/// `‖a - b‖ / max(1, ‖b‖)`.
pub fn rel_norm_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// Symmetrizes in place by averaging with the transpose.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_roundtrip() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let flat = flatten_upper(&m, 2.0);
        assert_eq!(flat, vec![1.0, 4.0, 6.0, 4.0, 10.0, 6.0]);
        assert_eq!(unflatten_upper(&flat, 3, 2.0), m);
        assert_eq!(upper_pairs(3), vec![(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]);
    }

    #[test]
    fn fd_gradient_of_quadratic() {
        let x = DVector::from_vec(vec![1.0, -2.0]);
        let g = central_gradient(|v| v[0] * v[0] + 3.0 * v[0] * v[1], &x);
        assert!((g[0] - (2.0 - 6.0)).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(cholesky(&m).is_none());
        assert!(cholesky(&DMatrix::identity(2, 2)).is_some());
    }
}
