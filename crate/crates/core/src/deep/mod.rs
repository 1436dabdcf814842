//! Diagonal-Gaussian stochastic optimizers and their deep-learning baselines.

mod adam;
mod ivon;
mod rmsprop;
mod train;
mod von;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use ivon::{ivon_hessian_estimate, ivon_step, ivon_update, IvonConfig, IvonState};
pub use rmsprop::{rmsprop_step, RmspropConfig, RmspropState};
pub use train::{train, OptimizerSpec, TrainConfig, TrainFailure, TrainRow, TrainRunRecord};
pub use von::{von_estimates, von_step, von_update, Curvature, VonConfig, VonEstimates, VonExpectation, VonState};
