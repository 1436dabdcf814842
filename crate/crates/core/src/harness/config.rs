use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::blr::BlrConfig;
use crate::deep::TrainConfig;
use crate::error::{Error, Result};
use crate::gaussian::{GaussianFamily, RNG_ALGORITHM};
use crate::models::{logistic_synthetic, ridge_synthetic, two_spirals, Activation, Dataset};

pub const SCHEMA_VERSION: u32 = 1;

fn default_rng() -> String {
    RNG_ALGORITHM.to_string()
}

/// A complete, self-describing experiment. Unknown keys are rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Output subdirectory; defaults to `<method>-<hash>`.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_rng")]
    pub rng: String,
    pub model: ModelSpec,
    pub run: RunSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source", deny_unknown_fields)]
pub enum DataSpec {
    /// Gaussian design; for logistic models labels come from a random hyperplane
    /// and are flipped with probability `flip`.
    Synthetic {
        n: usize,
        p: usize,
        seed: u64,
        #[serde(default)]
        flip: f64,
    },
    Spirals {
        n: usize,
        noise: f64,
        seed: u64,
    },
    /// Comma-separated numbers, one example per line, target in the last column.
    /// An optional non-numeric header line is skipped.
    Csv {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ModelSpec {
    /// Linear regression with unit noise. `prior_precision` (default 1) applies to BLR runs.
    Ridge {
        data: DataSpec,
        #[serde(default)]
        prior_precision: Option<f64>,
    },
    Logistic {
        data: DataSpec,
        #[serde(default)]
        prior_precision: Option<f64>,
    },
    Mlp {
        layers: Vec<usize>,
        activation: Activation,
        data: DataSpec,
        #[serde(default)]
        prior_precision: Option<f64>,
    },
}

impl ModelSpec {
    pub fn data(&self) -> &DataSpec {
        match self {
            ModelSpec::Ridge { data, .. } | ModelSpec::Logistic { data, .. } | ModelSpec::Mlp { data, .. } => data,
        }
    }

    fn data_mut(&mut self) -> &mut DataSpec {
        match self {
            ModelSpec::Ridge { data, .. } | ModelSpec::Logistic { data, .. } | ModelSpec::Mlp { data, .. } => data,
        }
    }

    pub fn prior_precision(&self) -> Option<f64> {
        match self {
            ModelSpec::Ridge { prior_precision, .. }
            | ModelSpec::Logistic { prior_precision, .. }
            | ModelSpec::Mlp { prior_precision, .. } => *prior_precision,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Ridge { .. } => "ridge",
            ModelSpec::Logistic { .. } => "logistic",
            ModelSpec::Mlp { .. } => "mlp",
        }
    }

    /// Builds the dataset this spec refers to.
    pub fn dataset(&self) -> Result<Dataset> {
        match self.data() {
            DataSpec::Synthetic { n, p, seed, flip } => Ok(match self {
                ModelSpec::Ridge { .. } => ridge_synthetic(*n, *p, *seed),
                _ => logistic_synthetic(*n, *p, *flip, *seed),
            }),
            DataSpec::Spirals { n, noise, seed } => Ok(two_spirals(*n, *noise, *seed)),
            DataSpec::Csv { path } => load_csv(path),
        }
    }
}

/// Initial BLR iterate `N(m₀, diag(init_precision)⁻¹)`; `m₀ = 0` unless a seed is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlrInit {
    #[serde(default = "one")]
    pub precision: f64,
    /// Draws `m₀ ~ N(0, I)` from this seed when set.
    #[serde(default)]
    pub mean_seed: Option<u64>,
}

fn one() -> f64 {
    1.0
}

impl Default for BlrInit {
    fn default() -> Self {
        Self { precision: 1.0, mean_seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method", deny_unknown_fields)]
pub enum RunSpec {
    /// Gaussian BLR on the full negative log-joint.
    Blr {
        family: GaussianFamily,
        blr: BlrConfig,
        #[serde(default)]
        init: BlrInit,
    },
    /// Minibatch training with one of the deep optimizers.
    Train {
        train: TrainConfig,
        budget: usize,
        /// Parameter initialization: MLPs use Glorot with this seed (default 0);
        /// other models start at zero, or at `N(0, I)` draws when set.
        #[serde(default)]
        init_seed: Option<u64>,
    },
}

impl RunSpec {
    pub fn method(&self) -> &'static str {
        match self {
            RunSpec::Blr { .. } => "blr",
            RunSpec::Train { train, .. } => train.optimizer.name(),
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a config file. Relative data paths are resolved against
    /// the config's directory and stored absolute, so the sidecar is relocatable.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let DataSpec::Csv { path: data } = cfg.model.data_mut() {
            if data.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                *data = std::path::absolute(base.join(&*data))?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without filesystem resolution, then validates.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// First 16 hex digits of SHA-256 over the compact JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn run_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| format!("{}-{}", self.run.method(), self.hash()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} unsupported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.rng != RNG_ALGORITHM {
            return bad(format!("rng `{}` unsupported (expected `{RNG_ALGORITHM}`)", self.rng));
        }
        if let Some(name) = &self.name {
            if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
                return bad(format!("name `{name}` must be a single path component"));
            }
        }
        match self.model.data() {
            DataSpec::Synthetic { n, p, flip, .. } => {
                if *n == 0 || *p == 0 || !(0.0..=0.5).contains(flip) {
                    return bad("synthetic data needs n, p >= 1 and flip in [0, 0.5]".into());
                }
            }
            DataSpec::Spirals { n, noise, .. } => {
                if *n < 2 || !(*noise >= 0.0) {
                    return bad("spirals need n >= 2 and noise >= 0".into());
                }
            }
            DataSpec::Csv { path } => {
                if path.is_absolute() && !path.is_file() {
                    return bad(format!("data file {} does not exist", path.display()));
                }
            }
        }
        if let ModelSpec::Mlp { layers, data, .. } = &self.model {
            let input = match data {
                DataSpec::Spirals { .. } => Some(2),
                DataSpec::Synthetic { p, .. } => Some(*p),
                DataSpec::Csv { .. } => None,
            };
            if layers.len() < 2 || layers.last() != Some(&1) || input.is_some_and(|p| layers[0] != p) {
                return bad("MLP layers must start at the input width and end at 1".into());
            }
        }
        if self.model.prior_precision().is_some_and(|t| !(t > 0.0)) {
            return bad("prior_precision must be positive".into());
        }
        match &self.run {
            RunSpec::Blr { family, blr, init } => {
                blr.validate()?;
                if family.dim() == 0 || !(init.precision > 0.0) {
                    return bad("BLR needs dim >= 1 and init precision > 0".into());
                }
                if matches!(self.model, ModelSpec::Mlp { .. })
                    && blr.max_iters > 0
                    && family.is_full()
                    && family.dim() > 64
                {
                    return bad("full-covariance BLR on an MLP above 64 parameters is not supported".into());
                }
            }
            RunSpec::Train { train, .. } => {
                train.validate()?;
                if self.model.prior_precision().is_some() {
                    return bad(
                        "training runs take their prior from train.weight_decay, not model.prior_precision".into()
                    );
                }
            }
        }
        Ok(())
    }
}

fn load_csv(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::Config(format!("{}:{}: {e}", path.display(), i + 1))),
        }
    }
    let width = rows.first().map(Vec::len).unwrap_or(0);
    if rows.is_empty() || width < 2 || rows.iter().any(|r| r.len() != width) {
        return Err(Error::Config(format!("{}: need rows of equal width >= 2", path.display())));
    }
    let p = width - 1;
    let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    let y = DVector::from_fn(rows.len(), |i, _| rows[i][p]);
    Ok(Dataset { x, y })
}

#[cfg(test)]
mod tests {
    use super::*;

    const RIDGE: &str = r#"{
        "schema_version": 1,
        "model": {"kind": "ridge", "data": {"source": "synthetic", "n": 20, "p": 3, "seed": 1}},
        "run": {"method": "blr", "family": {"covariance": "full", "dim": 3},
                "blr": {"schedule": {"kind": "constant", "rho": 1.0}, "max_iters": 5, "estimator": {"kind": "exact"}}}
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_json(RIDGE).unwrap();
        let again = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        assert!(cfg.run_name().starts_with("blr-"));
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        let extra = RIDGE.replacen("\"schema_version\": 1,", "\"schema_version\": 1, \"bogus\": 0,", 1);
        assert!(matches!(ExperimentConfig::from_json(&extra), Err(Error::Config(_))));
        let nested = RIDGE.replacen("\"seed\": 1", "\"seed\": 1, \"extra\": 2", 1);
        assert!(matches!(ExperimentConfig::from_json(&nested), Err(Error::Config(_))));
        let v2 = RIDGE.replacen("\"schema_version\": 1", "\"schema_version\": 2", 1);
        assert!(matches!(ExperimentConfig::from_json(&v2), Err(Error::Config(_))));
        let rng = RIDGE.replacen("\"schema_version\": 1,", "\"schema_version\": 1, \"rng\": \"pcg\",", 1);
        assert!(matches!(ExperimentConfig::from_json(&rng), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_missing_data_file() {
        let cfg = RIDGE.replacen(
            r#"{"source": "synthetic", "n": 20, "p": 3, "seed": 1}"#,
            r#"{"source": "csv", "path": "/definitely/not/here.csv"}"#,
            1,
        );
        assert!(matches!(ExperimentConfig::from_json(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn csv_loader_skips_header() {
        let dir = std::env::temp_dir().join(format!("natvb-csv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("d.csv");
        std::fs::write(&path, "x1,x2,y\n1,2,0\n3,4,1\n").unwrap();
        let d = load_csv(&path).unwrap();
        assert_eq!(d.x, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(d.y, DVector::from_vec(vec![0.0, 1.0]));
        std::fs::remove_dir_all(dir).unwrap();
    }
}
