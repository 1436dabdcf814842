use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::expfam::{ExponentialFamily, NaturalParams};
use crate::gaussian::GaussianFamily;
use crate::models::{ridge_natural_coefficients, QuadraticLoss, RidgeModel};

/// Likelihood and prior that are both log-linear in the family's `T(θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateModel {
    pub family: GaussianFamily,
    pub lik: DVector<f64>,
    pub prior: DVector<f64>,
}

impl ConjugateModel {
    /// Fails unless `lik + prior` is a proper posterior.
    pub fn new(family: GaussianFamily, lik: DVector<f64>, prior: DVector<f64>) -> Result<Self> {
        family.check_dim(&lik)?;
        family.check_dim(&prior)?;
        let model = Self { family, lik, prior };
        conjugate_posterior(&model)?;
        Ok(model)
    }

    pub fn from_ridge(model: &RidgeModel) -> Result<Self> {
        let (lik, prior) = ridge_natural_coefficients(model);
        Self::new(GaussianFamily::Full(model.dim()), lik, prior)
    }

    /// The joint as a loss, `ℓ̄(θ) = −⟨λ̃_lik + λ̃_prior, T(θ)⟩`.
    pub fn loss(&self) -> QuadraticLoss {
        QuadraticLoss::from_natural_coefficients(self.family, &(&self.lik + &self.prior))
    }
}

/// Bayes' rule as addition: `λ* = λ̃_lik + λ̃_prior`.
pub fn conjugate_posterior(model: &ConjugateModel) -> Result<NaturalParams> {
    let lambda = NaturalParams::new(&model.lik + &model.prior)?;
    if !model.family.is_valid(&lambda) {
        return Err(Error::Domain("likelihood + prior is not a proper posterior".into()));
    }
    Ok(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn ridge_identity_design() {
        let ridge = RidgeModel::new(DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, 2.0]), 1.0).unwrap();
        let model = ConjugateModel::from_ridge(&ridge).unwrap();
        let post = conjugate_posterior(&model).unwrap();
        let mo = model.family.natural_to_moment(&post).unwrap();
        assert!((mo.mean - DVector::from_vec(vec![0.5, 1.0])).amax() < 1e-15);
        assert_eq!(mo.precision.to_matrix(), DMatrix::identity(2, 2) * 2.0);
    }

    #[test]
    fn no_data_gives_prior() {
        let fam = GaussianFamily::Full(2);
        let prior = fam.pack(&DVector::zeros(2), &(DMatrix::identity(2, 2) * -0.5));
        let model = ConjugateModel::new(fam, DVector::zeros(5), prior.clone()).unwrap();
        assert_eq!(conjugate_posterior(&model).unwrap().into_inner(), prior);
    }

    #[test]
    fn improper_sum_rejected() {
        let fam = GaussianFamily::Full(1);
        let r = ConjugateModel::new(fam, DVector::from_vec(vec![0.0, 1.0]), DVector::from_vec(vec![0.0, -0.5]));
        assert!(matches!(r, Err(Error::Domain(_))));
    }
}
