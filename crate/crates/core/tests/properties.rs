use nalgebra::{DMatrix, DVector};
use natvb::expfam::{ExpectationParams, ExponentialFamily, NaturalParams};
use natvb::gaussian::{random_natural, rng_from_seed, GaussianFamily, GaussianMoment};
use natvb::linalg::{central_jacobian, flatten_upper, rel_norm_diff};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = GaussianFamily> {
    (1usize..=5, any::<bool>())
        .prop_map(|(p, full)| if full { GaussianFamily::Full(p) } else { GaussianFamily::Diagonal(p) })
}

fn instance() -> impl Strategy<Value = (GaussianFamily, NaturalParams)> {
    (family(), any::<u64>()).prop_map(|(fam, seed)| (fam, random_natural(fam, &mut rng_from_seed(seed, 0))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn natural_dual_round_trip((fam, lambda) in instance()) {
        let mu = fam.natural_to_dual(&lambda).unwrap();
        let back = fam.dual_to_natural(&mu).unwrap();
        prop_assert!(rel_norm_diff(back.as_vector(), lambda.as_vector()) < 1e-9);
    }

    #[test]
    fn fisher_is_jacobian_of_mean_map((fam, lambda) in instance()) {
        let fd = central_jacobian(
            |l| fam.natural_to_dual(&NaturalParams::new(l.clone()).unwrap()).unwrap().into_inner(),
            lambda.as_vector(),
        );
        let f = fam.fisher(&lambda).unwrap();
        prop_assert!((f.matrix() - &fd).norm() / f.matrix().norm().max(1.0) < 1e-6);
    }

    #[test]
    fn kl_is_bregman_divergence_of_cumulant((fam, a) in instance(), seed in any::<u64>()) {
        let b = random_natural(fam, &mut rng_from_seed(seed, 1));
        let kl = fam.kl_divergence(&a, &b).unwrap();
        let mu_a = fam.natural_to_dual(&a).unwrap();
        let bregman = fam.cumulant(&b).unwrap() - fam.cumulant(&a).unwrap()
            - mu_a.as_vector().dot(&(b.as_vector() - a.as_vector()));
        prop_assert!(kl >= -1e-12);
        prop_assert!((kl - bregman).abs() < 1e-9 * kl.abs().max(1.0));
        prop_assert!(fam.kl_divergence(&a, &a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn fenchel_conjugate_is_negative_entropy((fam, lambda) in instance()) {
        let mu = fam.natural_to_dual(&lambda).unwrap();
        let h = fam.entropy(&lambda).unwrap();
        prop_assert!((h + fam.fenchel_conjugate(&mu).unwrap()).abs() < 1e-10 * h.abs().max(1.0));
    }

    #[test]
    fn diagonal_family_agrees_with_full_family_restriction(
        p in 1usize..=5,
        mean in proptest::collection::vec(-3.0f64..3.0, 5),
        prec in proptest::collection::vec(0.05f64..20.0, 5),
    ) {
        let m = DVector::from_column_slice(&mean[..p]);
        let s = DVector::from_column_slice(&prec[..p]);
        let diag = GaussianFamily::Diagonal(p);
        let full = GaussianFamily::Full(p);
        let ld = diag.moment_to_natural(&GaussianMoment::diagonal(m.clone(), s.clone())).unwrap();
        let lf = full.moment_to_natural(&GaussianMoment::full(m, DMatrix::from_diagonal(&s))).unwrap();
        let (a, b) = (diag.cumulant(&ld).unwrap(), full.cumulant(&lf).unwrap());
        prop_assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        let (a, b) = (diag.entropy(&ld).unwrap(), full.entropy(&lf).unwrap());
        prop_assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        let theta = DVector::from_fn(p, |i, _| 0.3 * i as f64 - 0.5);
        let (a, b) = (diag.log_density(&ld, &theta).unwrap(), full.log_density(&lf, &theta).unwrap());
        prop_assert!((a - b).abs() < 1e-11 * a.abs().max(1.0));
    }

    #[test]
    fn invalid_precision_is_rejected(p in 1usize..=4, bad in -5.0f64..=0.0) {
        let fam = GaussianFamily::Diagonal(p);
        let mut coords = DVector::zeros(2 * p);
        coords.rows_mut(p, p).fill(-0.5 * bad);
        let lambda = NaturalParams::new(coords).unwrap();
        prop_assert!(!fam.is_valid(&lambda));
        prop_assert!(fam.natural_to_dual(&lambda).is_err());
    }
}

#[test]
fn dual_parameters_are_first_and_second_moments() {
    let fam = GaussianFamily::Full(2);
    let m = DVector::from_vec(vec![1.0, -2.0]);
    let prec = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
    let lambda = fam.moment_to_natural(&GaussianMoment::full(m.clone(), prec.clone())).unwrap();
    let mu: ExpectationParams = fam.natural_to_dual(&lambda).unwrap();
    let second = prec.try_inverse().unwrap() + &m * m.transpose();
    // μ holds E[θ] and the plain upper triangle of E[θθᵀ].
    let expected: Vec<f64> = m.iter().copied().chain(flatten_upper(&second, 1.0)).collect();
    assert!((mu.as_vector() - DVector::from_vec(expected)).amax() < 1e-14);
}

#[test]
fn sample_moments_match_dual_parameters_within_clt_bounds() {
    for (i, fam) in [GaussianFamily::Full(3), GaussianFamily::Diagonal(3)].into_iter().enumerate() {
        let lambda = random_natural(fam, &mut rng_from_seed(51, i as u64));
        let k = 100_000;
        let batch = fam.sample(&lambda, k, 7).unwrap();
        let stats: Vec<DVector<f64>> =
            batch.samples.column_iter().map(|c| fam.sufficient_stats(&c.into_owned()).into_inner()).collect();
        let kf = k as f64;
        let mean = stats.iter().fold(DVector::zeros(fam.param_dim()), |acc, t| acc + t) / kf;
        let var =
            stats.iter().fold(DVector::zeros(fam.param_dim()), |acc, t| acc + (t - &mean).map(|v| v * v)) / (kf - 1.0);
        let mu = fam.natural_to_dual(&lambda).unwrap();
        for j in 0..fam.param_dim() {
            let z = (mean[j] - mu[j]).abs() / (var[j] / kf).sqrt();
            assert!(z < 4.5, "{fam:?} coordinate {j}: z = {z}");
        }
    }
}
