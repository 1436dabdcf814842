//! The delta-method BLR with ρ = 1 reproduces Newton's method on logistic regression.

use nalgebra::{DMatrix, DVector};
use natvb::blr::{blr_step, newton_recovery_step, BlrConfig, BlrState, RhoSchedule};
use natvb::gaussian::{GaussianFamily, GaussianMoment};
use natvb::models::{logistic_synthetic, LogisticModel, Penalized};
use natvb::natgrad::Estimator;

fn main() {
    let d = logistic_synthetic(150, 3, 0.1, 2);
    let loss = Penalized::new(LogisticModel::new(d.x, d.y).unwrap(), 1.0);
    let fam = GaussianFamily::Full(3);
    let cfg = BlrConfig::new(RhoSchedule::constant(1.0), Estimator::Delta);
    let init = GaussianMoment::full(DVector::zeros(3), DMatrix::identity(3, 3));
    let mut state = BlrState::new(fam, fam.moment_to_natural(&init).unwrap()).unwrap();
    let mut newton = DVector::zeros(3);
    for t in 1..=8 {
        state = blr_step(fam, &state, &loss, &cfg).unwrap();
        newton = newton_recovery_step(&newton, &loss).unwrap().0;
        let m = fam.mean(&state.lambda).unwrap();
        println!("iter {t}: BLR mean {:?}  |BLR − Newton| {:.1e}", m.as_slice(), (&m - &newton).amax());
    }
}
