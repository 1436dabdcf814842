//! Natural/expectation duality for Gaussians: round trip, entropy gradient, Fenchel identity, KL.

use natvb::expfam::ExponentialFamily;
use natvb::gaussian::{random_natural, rng_from_seed, GaussianFamily};
use natvb::linalg::rel_norm_diff;

fn main() {
    let mut rng = rng_from_seed(1, 0);
    for fam in [GaussianFamily::Full(3), GaussianFamily::Diagonal(3)] {
        let lambda = random_natural(fam, &mut rng);
        let mu = fam.natural_to_dual(&lambda).unwrap();
        let back = fam.dual_to_natural(&mu).unwrap();
        let grad_h = fam.entropy_gradient(&lambda).unwrap();
        let f_lambda = -(fam.fisher(&lambda).unwrap().matrix() * lambda.as_vector());
        let h = fam.entropy(&lambda).unwrap();
        let other = random_natural(fam, &mut rng);
        println!("{fam:?}");
        println!("  λ → μ → λ rel err     {:.2e}", rel_norm_diff(back.as_vector(), lambda.as_vector()));
        println!("  ∇H vs −F(λ)λ rel err  {:.2e}", rel_norm_diff(&grad_h, &f_lambda));
        println!("  H + A*(μ)             {:.2e}", h + fam.fenchel_conjugate(&mu).unwrap());
        println!(
            "  KL(q‖q') = {:.4}, KL(q‖q) = {:.1e}",
            fam.kl_divergence(&lambda, &other).unwrap(),
            fam.kl_divergence(&lambda, &lambda).unwrap()
        );
    }
}
