//! BLR on Bayesian logistic regression with full and diagonal Gaussians.

use nalgebra::{DMatrix, DVector};
use natvb::blr::{BlrConfig, RhoSchedule};
use natvb::gaussian::{GaussianFamily, GaussianMoment};
use natvb::harness::run_blr;
use natvb::models::{logistic_synthetic, LogisticModel, Penalized};
use natvb::natgrad::Estimator;

fn main() {
    let d = logistic_synthetic(200, 2, 0.1, 5);
    let loss = Penalized::new(LogisticModel::new(d.x, d.y).unwrap(), 1.0);
    for (fam, init) in [
        (GaussianFamily::Full(2), GaussianMoment::full(DVector::zeros(2), DMatrix::identity(2, 2))),
        (GaussianFamily::Diagonal(2), GaussianMoment::diagonal(DVector::zeros(2), DVector::from_element(2, 1.0))),
    ] {
        let cfg = BlrConfig::new(RhoSchedule::constant(0.5), Estimator::Quadrature { nodes: 20 });
        let run = run_blr(fam, &loss, &cfg, fam.moment_to_natural(&init).unwrap()).map_err(|f| f.error).unwrap();
        let post = fam.natural_to_moment(&run.state.lambda).unwrap();
        println!(
            "{fam:?}: {} iterations, converged {}, objective {:.6}, residual {:.2e}",
            run.iterations(),
            run.converged,
            run.final_objective().unwrap_or(f64::NAN),
            run.final_residual()
        );
        println!("  mean {:?}", post.mean.as_slice());
        for row in post.precision.to_matrix().row_iter() {
            println!("  precision row {:?}", row.iter().collect::<Vec<_>>());
        }
    }
}
