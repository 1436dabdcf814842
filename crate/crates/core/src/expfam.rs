//! Minimal exponential families `q(θ) = exp(⟨λ, T(θ)⟩ − A(λ))` with base measure one.
//!
//! A family implements the cumulant `A`, the two coordinate maps between natural
//! parameters `λ` and expectation parameters `μ = ∇A(λ)`, and the Fisher matrix
//! `∇²A(λ)`. Entropy, its gradient, the Fenchel conjugate of `A`, and the KL
//! divergence are derived from those in the provided methods.

use std::fmt;
use std::ops::Deref;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

macro_rules! coord_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(DVector<f64>);

        impl $name {
            /// Wraps a coordinate vector, rejecting NaN and infinite entries.
            pub fn new(coords: DVector<f64>) -> Result<Self> {
                if coords.iter().all(|v| v.is_finite()) {
                    Ok(Self(coords))
                } else {
                    Err(Error::Domain(format!("{} has non-finite coordinates", stringify!($name))))
                }
            }

            pub fn from_slice(coords: &[f64]) -> Result<Self> {
                Self::new(DVector::from_column_slice(coords))
            }

            pub fn as_vector(&self) -> &DVector<f64> {
                &self.0
            }

            pub fn into_inner(self) -> DVector<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = DVector<f64>;

            fn deref(&self) -> &DVector<f64> {
                &self.0
            }
        }
    };
}

coord_newtype!(
    /// Natural (canonical) coordinates `λ`.
    NaturalParams
);
coord_newtype!(
    /// Expectation coordinates `μ = E_q[T(θ)]`, flattened like [`NaturalParams`].
    ExpectationParams
);
coord_newtype!(
    /// Sufficient statistics `T(θ)` at a single point.
    SufficientStats
);

/// Symmetric positive-definite Fisher matrix `F(λ) = ∇²A(λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix(DMatrix<f64>);

impl FisherMatrix {
    /// Checks symmetry (1e-12 relative) and positive-definiteness.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::SingularFisher);
        }
        let scale = matrix.amax().max(1.0);
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::Domain(format!("Fisher matrix asymmetric by {asym:e}")));
        }
        if linalg::cholesky(&matrix).is_none() {
            return Err(Error::SingularFisher);
        }
        Ok(Self(matrix))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Solves `F x = rhs` through a Cholesky factorization.
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let chol = linalg::cholesky(&self.0).ok_or(Error::SingularFisher)?;
        Ok(chol.solve(rhs))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0.clone().symmetric_eigenvalues().min()
    }
}

/// A minimal exponential family with `h(θ) = 1`.
pub trait ExponentialFamily: fmt::Debug {
    /// Identifier used in error messages and metadata.
    fn name(&self) -> String;

    /// Dimension of θ.
    fn theta_dim(&self) -> usize;

    /// Dimension of λ (and μ, and T(θ)).
    fn param_dim(&self) -> usize;

    /// Families with a non-constant base measure are not supported.
    fn has_unit_base_measure(&self) -> bool {
        true
    }

    /// Membership test for the open natural domain Ω.
    fn is_valid(&self, lambda: &NaturalParams) -> bool;

    fn cumulant(&self, lambda: &NaturalParams) -> Result<f64>;

    fn natural_to_dual(&self, lambda: &NaturalParams) -> Result<ExpectationParams>;

    fn dual_to_natural(&self, mu: &ExpectationParams) -> Result<NaturalParams>;

    fn fisher(&self, lambda: &NaturalParams) -> Result<FisherMatrix>;

    fn sufficient_stats(&self, theta: &DVector<f64>) -> SufficientStats;

    fn check_dim(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() == self.param_dim() {
            Ok(())
        } else {
            Err(Error::Dimension { expected: self.param_dim(), got: v.len() })
        }
    }

    /// `⟨λ, T(θ)⟩ − A(λ)`.
    fn log_density(&self, lambda: &NaturalParams, theta: &DVector<f64>) -> Result<f64> {
        let t = self.sufficient_stats(theta);
        Ok(lambda.dot(&t) - self.cumulant(lambda)?)
    }

    /// `H(q) = A(λ) − ⟨λ, ∇A(λ)⟩`.
    fn entropy(&self, lambda: &NaturalParams) -> Result<f64> {
        let mu = self.natural_to_dual(lambda)?;
        Ok(self.cumulant(lambda)? - lambda.dot(&mu))
    }

    /// `∇_λ H(q_λ) = −F(λ) λ`.
    fn entropy_gradient(&self, lambda: &NaturalParams) -> Result<DVector<f64>> {
        let f = self.fisher(lambda)?;
        Ok(-(f.matrix() * lambda.as_vector()))
    }

    /// `A*(μ) = ⟨λ(μ), μ⟩ − A(λ(μ))`, the negative entropy.
    fn fenchel_conjugate(&self, mu: &ExpectationParams) -> Result<f64> {
        let lambda = self.dual_to_natural(mu)?;
        Ok(lambda.dot(mu) - self.cumulant(&lambda)?)
    }

    /// `KL(q_a ‖ q_b)` as the Bregman divergence of `A`.
    fn kl_divergence(&self, lambda_a: &NaturalParams, lambda_b: &NaturalParams) -> Result<f64> {
        self.check_dim(lambda_b)?;
        let mu_a = self.natural_to_dual(lambda_a)?;
        let a_a = self.cumulant(lambda_a)?;
        let a_b = self.cumulant(lambda_b)?;
        Ok(a_b - a_a - (lambda_b.as_vector() - lambda_a.as_vector()).dot(&mu_a))
    }

    /// `∇_μ KL(q_λ ‖ q_ref) = λ − λ_ref`.
    fn kl_gradient_wrt_dual(&self, lambda: &NaturalParams, lambda_ref: &NaturalParams) -> Result<DVector<f64>> {
        for l in [lambda, lambda_ref] {
            self.check_dim(l)?;
            if !self.is_valid(l) {
                return Err(Error::Domain(format!("{} natural parameters outside Ω", self.name())));
            }
        }
        Ok(lambda.as_vector() - lambda_ref.as_vector())
    }
}

/// A family member `q_λ`, validated at construction.
#[derive(Debug, Clone)]
pub struct ExpFamDistribution<F: ExponentialFamily> {
    family: F,
    lambda: NaturalParams,
}

impl<F: ExponentialFamily + Clone> ExpFamDistribution<F> {
    pub fn new(family: F, lambda: NaturalParams) -> Result<Self> {
        if !family.has_unit_base_measure() {
            return Err(Error::UnsupportedBaseMeasure(family.name()));
        }
        family.check_dim(&lambda)?;
        if !family.is_valid(&lambda) {
            return Err(Error::Domain(format!("{} natural parameters outside Ω", family.name())));
        }
        Ok(Self { family, lambda })
    }

    pub fn family(&self) -> &F {
        &self.family
    }

    pub fn natural(&self) -> &NaturalParams {
        &self.lambda
    }

    pub fn cumulant(&self) -> f64 {
        self.family.cumulant(&self.lambda).expect("validated at construction")
    }

    pub fn expectation(&self) -> ExpectationParams {
        self.family.natural_to_dual(&self.lambda).expect("validated at construction")
    }

    pub fn fisher(&self) -> Result<FisherMatrix> {
        self.family.fisher(&self.lambda)
    }

    pub fn entropy(&self) -> f64 {
        self.family.entropy(&self.lambda).expect("validated at construction")
    }

    pub fn log_density(&self, theta: &DVector<f64>) -> f64 {
        self.family.log_density(&self.lambda, theta).expect("validated at construction")
    }

    /// `KL(self ‖ other)`; both must come from the same family.
    pub fn kl(&self, other: &Self) -> Result<f64> {
        if self.family.name() != other.family.name() {
            return Err(Error::FamilyMismatch { left: self.family.name(), right: other.family.name() });
        }
        self.family.kl_divergence(&self.lambda, &other.lambda)
    }
}
