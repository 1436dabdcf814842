use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::expfam::NaturalParams;
use crate::gaussian::{GaussianFamily, GaussianMoment};
use crate::harness::config::{ExperimentConfig, ModelSpec};
use crate::harness::run::BuiltModel;
use crate::models::ridge_exact_posterior;

/// Exact ridge posterior for a ridge config, in moment and natural form.
pub fn ridge_oracle(cfg: &ExperimentConfig) -> Result<(GaussianMoment, NaturalParams)> {
    if !matches!(cfg.model, ModelSpec::Ridge { .. }) {
        return Err(Error::Config(format!("oracle ridge needs a ridge model, got {}", cfg.model.kind())));
    }
    let BuiltModel::Ridge(model) = BuiltModel::build(&cfg.model)? else { unreachable!("ridge spec builds ridge") };
    let moment = ridge_exact_posterior(&model)?;
    let lambda = GaussianFamily::Full(model.dim()).moment_to_natural(&moment)?;
    Ok((moment, lambda))
}

pub fn ridge_oracle_json(cfg: &ExperimentConfig) -> Result<Value> {
    let (moment, lambda) = ridge_oracle(cfg)?;
    let precision = moment.precision.to_matrix();
    let rows: Vec<Vec<f64>> = precision.row_iter().map(|r| r.iter().copied().collect()).collect();
    Ok(json!({
        "mean": moment.mean.as_slice(),
        "precision": rows,
        "natural": lambda.as_slice(),
    }))
}
