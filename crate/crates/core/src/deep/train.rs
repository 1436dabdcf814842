//! Minibatch training loop shared by all four optimizers.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::deep::{
    adam_step, ivon_step, rmsprop_step, von_step, AdamConfig, AdamState, IvonConfig, IvonState, RmspropConfig,
    RmspropState, VonConfig, VonState,
};
use crate::error::{Error, Result};
use crate::gaussian::rng_from_seed;
use crate::models::{DataFit, Penalized};
use crate::natgrad::LossModel;

const BATCH_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OptimizerSpec {
    Rmsprop(RmspropConfig),
    Adam(AdamConfig),
    Von(VonConfig),
    Ivon(IvonConfig),
}

impl OptimizerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerSpec::Rmsprop(_) => "rmsprop",
            OptimizerSpec::Adam(_) => "adam",
            OptimizerSpec::Von(_) => "von",
            OptimizerSpec::Ivon(_) => "ivon",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OptimizerSpec::Rmsprop(c) => c.validate(),
            OptimizerSpec::Adam(c) => c.validate(),
            OptimizerSpec::Von(c) => c.validate(),
            OptimizerSpec::Ivon(c) => c.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerSpec,
    /// Examples per step; `None` means full batch.
    #[serde(default)]
    pub batch_size: Option<usize>,
    /// Prior precision per example (weight decay) for RMSprop, Adam and VON.
    /// IVON reads its own `weight_decay`.
    #[serde(default)]
    pub weight_decay: f64,
    /// VON initial precision, per example: `s₀ = N · init_precision`.
    #[serde(default = "default_init_precision")]
    pub init_precision: f64,
    /// Seed for minibatch order.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
}

fn default_init_precision() -> f64 {
    1.0
}

fn default_log_every() -> usize {
    1
}

impl TrainConfig {
    pub fn new(optimizer: OptimizerSpec) -> Self {
        Self {
            optimizer,
            batch_size: None,
            weight_decay: 0.0,
            init_precision: default_init_precision(),
            seed: 0,
            log_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.batch_size == Some(0)
            || self.log_every == 0
            || !(self.weight_decay >= 0.0)
            || !(self.init_precision > 0.0)
        {
            return Err(Error::Config(
                "batch_size and log_every must be >= 1; weight_decay >= 0; init_precision > 0".into(),
            ));
        }
        Ok(())
    }

    /// First 16 hex digits of SHA-256 over the JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut out = String::with_capacity(16);
        for b in digest.iter().take(8) {
            write!(out, "{b:02x}").unwrap();
        }
        out
    }
}

/// One metrics row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRow {
    pub step: usize,
    /// Mean training loss at the parameters (or posterior mean).
    pub loss: f64,
    /// Norm of the per-example gradient used in the step (full-batch at step 0).
    pub grad_norm: f64,
    /// Extremes of the scale vector: `v` (RMSprop/Adam), `s` (VON), `h + δ₀` (IVON).
    pub scale_min: f64,
    pub scale_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRunRecord {
    pub optimizer: String,
    pub seed: u64,
    pub config_hash: String,
    pub rows: Vec<TrainRow>,
    /// Seconds since start, per row. Kept out of the CSV so traces replay byte-for-byte.
    pub wall_time: Vec<f64>,
    pub final_params: DVector<f64>,
    /// Posterior precision for VON/IVON.
    pub final_precision: Option<DVector<f64>>,
}

impl TrainRunRecord {
    pub const CSV_HEADER: &'static str = "step,loss,grad_norm,scale_min,scale_max";

    pub fn final_loss(&self) -> f64 {
        self.rows.last().map(|r| r.loss).unwrap_or(f64::NAN)
    }

    /// Smallest `scale_min` over all rows.
    pub fn min_scale(&self) -> f64 {
        self.rows.iter().map(|r| r.scale_min).fold(f64::INFINITY, f64::min)
    }

    /// Floats use the shortest representation that parses back to the same value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(out, "{},{:?},{:?},{:?},{:?}", r.step, r.loss, r.grad_norm, r.scale_min, r.scale_max).unwrap();
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("step,wall_time_s\n");
        for (r, w) in self.rows.iter().zip(&self.wall_time) {
            writeln!(out, "{},{:?}", r.step, w).unwrap();
        }
        out
    }
}

/// A step error together with everything recorded before it.
#[derive(Debug, Clone)]
pub struct TrainFailure {
    pub error: Error,
    pub partial: Box<TrainRunRecord>,
}

struct BatchSampler {
    n: usize,
    size: usize,
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    fn new(n: usize, size: Option<usize>, seed: u64) -> Self {
        let size = size.unwrap_or(n).min(n);
        Self { n, size, order: (0..n).collect(), pos: n, rng: rng_from_seed(seed, BATCH_STREAM) }
    }

    fn next_batch(&mut self) -> Vec<usize> {
        if self.size == self.n {
            return (0..self.n).collect();
        }
        if self.pos + self.size > self.n {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let b = self.order[self.pos..self.pos + self.size].to_vec();
        self.pos += self.size;
        b
    }
}

enum OptState {
    Rmsprop(RmspropState),
    Adam(AdamState),
    Von(VonState),
    Ivon(IvonState),
}

fn extremes(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

impl OptState {
    fn params(&self) -> &DVector<f64> {
        match self {
            OptState::Rmsprop(s) => &s.theta,
            OptState::Adam(s) => &s.theta,
            OptState::Von(s) => &s.m,
            OptState::Ivon(s) => &s.m,
        }
    }

    fn scale(&self, spec: &OptimizerSpec) -> (f64, f64) {
        match (self, spec) {
            (OptState::Rmsprop(s), _) => extremes(s.v.iter().copied()),
            (OptState::Adam(s), _) => extremes(s.v.iter().copied()),
            (OptState::Von(s), _) => extremes(s.s.iter().copied()),
            (OptState::Ivon(s), OptimizerSpec::Ivon(c)) => extremes(s.h.iter().map(|h| h + c.weight_decay)),
            (OptState::Ivon(s), _) => extremes(s.h.iter().copied()),
        }
    }

    fn precision(&self, spec: &OptimizerSpec) -> Option<DVector<f64>> {
        match (self, spec) {
            (OptState::Von(s), _) => Some(s.s.clone()),
            (OptState::Ivon(s), OptimizerSpec::Ivon(c)) => Some(s.precision(c)),
            _ => None,
        }
    }
}

/// Runs `budget` optimizer steps on `fit` from `init`. Deterministic for a fixed config.
pub fn train<D: DataFit + ?Sized>(
    fit: &D,
    init: DVector<f64>,
    cfg: &TrainConfig,
    budget: usize,
) -> std::result::Result<TrainRunRecord, TrainFailure> {
    let spec = &cfg.optimizer;
    let n = fit.num_data();
    let start = Instant::now();
    let mut record = TrainRunRecord {
        optimizer: spec.name().to_string(),
        seed: cfg.seed,
        config_hash: cfg.hash(),
        rows: Vec::new(),
        wall_time: Vec::new(),
        final_params: init.clone(),
        final_precision: None,
    };
    let fail = |error: Error, record: TrainRunRecord| TrainFailure { error, partial: Box::new(record) };
    if let Err(e) = cfg.validate() {
        return Err(fail(e, record));
    }
    if init.len() != fit.dim() {
        return Err(fail(Error::Dimension { expected: fit.dim(), got: init.len() }, record));
    }

    let wd = cfg.weight_decay;
    let penalized = Penalized::new(fit, n as f64 * wd);
    let mut state = match spec {
        OptimizerSpec::Rmsprop(_) => OptState::Rmsprop(RmspropState::new(init)),
        OptimizerSpec::Adam(_) => OptState::Adam(AdamState::new(init)),
        OptimizerSpec::Von(_) => {
            let s = DVector::from_element(init.len(), n as f64 * cfg.init_precision);
            OptState::Von(VonState::new(init, s).map_err(|e| fail(e, record.clone()))?)
        }
        OptimizerSpec::Ivon(c) => OptState::Ivon(IvonState::new(init, c)),
    };

    let all = fit.all();
    let push_row = |record: &mut TrainRunRecord, state: &OptState, step: usize, grad_norm: f64| {
        let (scale_min, scale_max) = state.scale(spec);
        record.rows.push(TrainRow { step, loss: fit.mean_value(state.params()), grad_norm, scale_min, scale_max });
        record.wall_time.push(start.elapsed().as_secs_f64());
    };
    let init_grad = fit.batch_gradient(state.params(), &all) + state.params() * wd;
    push_row(&mut record, &state, 0, init_grad.norm());

    let mut sampler = BatchSampler::new(n, cfg.batch_size, cfg.seed);
    for step in 1..=budget {
        let batch = sampler.next_batch();
        let result: Result<(OptState, f64)> = match (&state, spec) {
            (OptState::Rmsprop(s), OptimizerSpec::Rmsprop(c)) => {
                let g = fit.batch_gradient(&s.theta, &batch) + &s.theta * wd;
                Ok((OptState::Rmsprop(rmsprop_step(s, &g, c)), g.norm()))
            }
            (OptState::Adam(s), OptimizerSpec::Adam(c)) => {
                let g = fit.batch_gradient(&s.theta, &batch) + &s.theta * wd;
                Ok((OptState::Adam(adam_step(s, &g, c)), g.norm()))
            }
            (OptState::Von(s), OptimizerSpec::Von(c)) => {
                let gn = penalized.batch_gradient(&s.m, &batch).norm() / n as f64;
                von_step(s, &penalized, c, Some(&batch)).map(|next| (OptState::Von(next), gn))
            }
            (OptState::Ivon(s), OptimizerSpec::Ivon(c)) => ivon_step(s, fit, &batch, c).map(|next| {
                let gn = next.g.norm();
                (OptState::Ivon(next), gn)
            }),
            _ => unreachable!("state built from spec"),
        };
        match result {
            Ok((next, gn)) => {
                state = next;
                if step % cfg.log_every == 0 || step == budget {
                    push_row(&mut record, &state, step, gn);
                }
            }
            Err(e) => {
                record.final_params = state.params().clone();
                record.final_precision = state.precision(spec);
                return Err(fail(e, record));
            }
        }
    }
    record.final_params = state.params().clone();
    record.final_precision = state.precision(spec);
    Ok(record)
}
