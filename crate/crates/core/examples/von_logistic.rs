//! VON on logistic regression, and its RMSprop special case.

use nalgebra::DVector;
use natvb::deep::{
    rmsprop_step, von_step, Curvature, RmspropConfig, RmspropState, VonConfig, VonExpectation, VonState,
};
use natvb::models::{logistic_synthetic, LogisticModel, Penalized};
use natvb::natgrad::LossModel;

fn main() {
    let d = logistic_synthetic(100, 2, 0.1, 10);
    let loss = Penalized::new(LogisticModel::new(d.x, d.y).unwrap(), 1.0);

    let cfg = VonConfig::new(0.1, 4, 42);
    let mut s = VonState::new(DVector::zeros(2), DVector::from_element(2, 1.0)).unwrap();
    for t in 0..500 {
        s = von_step(&s, &loss, &cfg, None).unwrap();
        if (t + 1) % 100 == 0 {
            println!("step {:>3}: m = {:?}, s = {:?}", t + 1, s.m.as_slice(), s.s.as_slice());
        }
    }

    // Squared-gradient curvature at the mean with a square-root scale is RMSprop.
    let rms_cfg = RmspropConfig { lr: 0.01, beta: 0.05, damping: 1e-8 };
    let von_cfg = VonConfig {
        expectation: VonExpectation::AtMean,
        curvature: Curvature::SquaredGradient,
        lr: Some(rms_cfg.lr),
        sqrt_scale: true,
        damping: rms_cfg.damping,
        ..VonConfig::new(rms_cfg.beta, 1, 0)
    };
    let v0 = DVector::from_element(2, 1e-3);
    let mut rms = RmspropState { theta: DVector::zeros(2), v: v0.clone(), t: 0 };
    let mut von = VonState::new(DVector::zeros(2), v0).unwrap();
    for _ in 0..200 {
        rms = rmsprop_step(&rms, &loss.gradient(&rms.theta), &rms_cfg);
        von = von_step(&von, &loss, &von_cfg, None).unwrap();
    }
    println!("RMSprop vs VON(g², √s) after 200 steps: max |Δθ| = {:.1e}", (&rms.theta - &von.m).amax());
}
