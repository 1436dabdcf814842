//! Bayesian ridge regression: one BLR step with ρ = 1 lands on the exact posterior.

use natvb::blr::{BlrConfig, RhoSchedule};
use natvb::gaussian::{random_natural, rng_from_seed, GaussianFamily};
use natvb::harness::run_blr;
use natvb::linalg::rel_norm_diff;
use natvb::models::{ridge_exact_posterior, ridge_synthetic, RidgeModel};
use natvb::natgrad::Estimator;

fn main() {
    let d = ridge_synthetic(50, 4, 7);
    let ridge = RidgeModel::new(d.x, d.y, 1.0).unwrap();
    let fam = GaussianFamily::Full(4);
    let exact = ridge_exact_posterior(&ridge).unwrap();

    let cfg = BlrConfig::new(RhoSchedule::constant(1.0), Estimator::Exact);
    let init = random_natural(fam, &mut rng_from_seed(3, 0));
    let run = run_blr(fam, &ridge.loss(), &cfg, init).map_err(|f| f.error).unwrap();
    let mean = fam.mean(&run.state.lambda).unwrap();

    println!("iterations: {}", run.iterations());
    println!("exact mean: {:?}", exact.mean.as_slice());
    println!("BLR mean:   {:?}", mean.as_slice());
    println!("rel err:    {:.2e}", rel_norm_diff(&mean, &exact.mean));
    print!("{}", run.to_csv());
}
