//! A BLR step equals the mirror-descent step argmin ⟨μ, −λ̃⟩ + KL(q‖q_t)/ρ solved numerically.

use natvb::blr::mirror_descent_step_numeric;
use natvb::gaussian::{random_natural, rng_from_seed, GaussianFamily};
use natvb::linalg::rel_norm_diff;

fn main() {
    let mut rng = rng_from_seed(11, 0);
    for fam in [GaussianFamily::Full(2), GaussianFamily::Diagonal(3)] {
        let lt = random_natural(fam, &mut rng);
        let tilde = random_natural(fam, &mut rng).into_inner();
        for rho in [0.1, 0.5, 1.0] {
            let numeric = mirror_descent_step_numeric(fam, &lt, &tilde, rho).unwrap();
            let blr = lt.as_vector() * (1.0 - rho) + &tilde * rho;
            println!("{fam:?} ρ = {rho}: rel gap {:.2e}", rel_norm_diff(numeric.as_vector(), &blr));
        }
    }
}
