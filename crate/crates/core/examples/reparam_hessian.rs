//! The reparameterization Hessian estimate ĝ ⊙ s ⊙ (θ − m) averages to diag(A) on a quadratic.

use nalgebra::DVector;
use natvb::gaussian::rng_from_seed;
use natvb::models::QuadraticLoss;
use natvb::natgrad::{reparam_hessian_diag_estimate, LossModel};
use rand::Rng;
use rand_distr::StandardNormal;

fn main() {
    let mut rng = rng_from_seed(9, 0);
    let q = QuadraticLoss::random(3, &mut rng);
    let m = DVector::from_vec(vec![0.5, -1.0, 0.2]);
    let s: DVector<f64> = DVector::from_vec(vec![2.0, 0.7, 5.0]);
    for k in [100usize, 10_000, 1_000_000] {
        let mut sum = DVector::zeros(3);
        for _ in 0..k {
            let theta = DVector::from_fn(3, |i, _| m[i] + rng.sample::<f64, _>(StandardNormal) / s[i].sqrt());
            sum += reparam_hessian_diag_estimate(&m, &s, &theta, &q.gradient(&theta));
        }
        println!("K = {k:>7}: estimate {:?}", (sum / k as f64).as_slice());
    }
    println!("diag(A):           {:?}", q.a.diagonal().as_slice());
}
