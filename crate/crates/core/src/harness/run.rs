use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};

use crate::blr::{
    blr_step_with_rho, fixed_point_residual, multiplicative_form_check, vb_objective, BlrConfig, BlrState,
    MULTIPLICATIVE_TOL,
};
use crate::deep::{train, OptimizerSpec, TrainRunRecord};
use crate::error::{Error, Result};
use crate::expfam::NaturalParams;
use crate::gaussian::{rng_from_seed, GaussianFamily, GaussianMoment};
use crate::harness::config::{BlrInit, ExperimentConfig, ModelSpec, RunSpec};
use crate::models::{DataFit, LogisticModel, MlpModel, Penalized, RidgeModel};
use crate::natgrad::{verify_derivatives, Estimator, ExpectationMethod, LossModel};

/// Environment variable naming the artifact root directory.
pub const OUT_DIR_ENV: &str = "NATVB_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "runs";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED_CHECK: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

/// Times `ρ` is halved after a step leaves the valid domain before giving up.
pub const MAX_HALVINGS: usize = 20;

const INIT_STREAM: u64 = 0x1417;

pub fn out_dir_from_env() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// One BLR trace row. `None` cells are written empty.
#[derive(Debug, Clone, PartialEq)]
pub struct BlrRow {
    pub iter: usize,
    /// `ρ` actually used (after any halvings).
    pub rho: Option<f64>,
    pub objective: Option<f64>,
    pub residual: f64,
    pub rel_change: Option<f64>,
    pub multiplicative_spread: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BlrRun {
    pub rows: Vec<BlrRow>,
    pub wall_time: Vec<f64>,
    pub state: BlrState,
    pub converged: bool,
    pub halvings: usize,
}

impl BlrRun {
    pub const CSV_HEADER: &'static str = "iter,rho,objective,residual,rel_change,multiplicative_spread";

    pub fn iterations(&self) -> usize {
        self.state.t
    }

    pub fn max_multiplicative_spread(&self) -> f64 {
        self.rows.iter().filter_map(|r| r.multiplicative_spread).fold(0.0, f64::max)
    }

    pub fn final_residual(&self) -> f64 {
        self.rows.last().map(|r| r.residual).unwrap_or(f64::NAN)
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.objective)
    }

    pub fn to_csv(&self) -> String {
        let cell = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{:?},{},{}",
                r.iter,
                cell(r.rho),
                cell(r.objective),
                r.residual,
                cell(r.rel_change),
                cell(r.multiplicative_spread)
            )
            .unwrap();
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("iter,wall_time_s\n");
        for (r, w) in self.rows.iter().zip(&self.wall_time) {
            writeln!(out, "{},{:?}", r.iter, w).unwrap();
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct BlrFailure {
    pub error: Error,
    /// `None` when the initial iterate itself was invalid.
    pub partial: Option<Box<BlrRun>>,
}

/// Objective method used for traces when the config leaves it unset: analytic or
/// quadrature when available, otherwise none (Monte-Carlo objectives are too costly per step).
fn trace_objective<L: LossModel + ?Sized>(cfg: &BlrConfig, loss: &L) -> Option<ExpectationMethod> {
    cfg.objective.or_else(|| match ExpectationMethod::auto(loss) {
        ExpectationMethod::Mc { .. } => None,
        m => Some(m),
    })
}

/// Runs the BLR from `init` until convergence or `max_iters`.
///
/// A step that leaves the valid domain is retried with `ρ/2`, at most
/// [`MAX_HALVINGS`] times. Deterministic estimators stop once the relative change
/// or the fixed-point residual is at most `tol`; Monte-Carlo runs use the full budget.
/// Every step is checked against the multiplicative form of the update.
pub fn run_blr<L: LossModel + ?Sized>(
    family: GaussianFamily,
    loss: &L,
    cfg: &BlrConfig,
    init: NaturalParams,
) -> std::result::Result<BlrRun, BlrFailure> {
    let start = Instant::now();
    let objective = trace_objective(cfg, loss);
    let step_cfg = BlrConfig { objective: None, ..cfg.clone() };
    let stochastic = cfg.estimator.is_stochastic();

    let state = BlrState::new(family, init).map_err(|error| BlrFailure { error, partial: None })?;
    let mut run = BlrRun { rows: Vec::new(), wall_time: Vec::new(), state, converged: false, halvings: 0 };
    macro_rules! fail {
        ($e:expr) => {
            return Err(BlrFailure { error: $e, partial: Some(Box::new(run)) })
        };
    }

    let measure = |state: &BlrState| -> Result<(Option<f64>, f64)> {
        let obj = match objective {
            Some(m) => Some(vb_objective(family, &state.lambda, loss, m)?),
            None => None,
        };
        let res = fixed_point_residual(family, &state.lambda, loss, &cfg.estimator)?.residual;
        Ok((obj, res))
    };

    match measure(&run.state) {
        Ok((objective, residual)) => {
            if let Some(o) = objective {
                run.state.objective_trace.push(o);
            }
            run.rows.push(BlrRow {
                iter: 0,
                rho: None,
                objective,
                residual,
                rel_change: None,
                multiplicative_spread: None,
            });
            run.wall_time.push(start.elapsed().as_secs_f64());
            if !stochastic && residual <= cfg.tol {
                run.converged = true;
                return Ok(run);
            }
        }
        Err(e) => fail!(e),
    }

    while run.state.t < cfg.max_iters {
        let mut rho = cfg.schedule.at(run.state.t);
        let mut halvings = 0;
        let next = loop {
            match blr_step_with_rho(family, &run.state, loss, &step_cfg, rho) {
                Ok(next) => break next,
                Err(Error::LeftDomain { .. }) if halvings < MAX_HALVINGS => {
                    rho *= 0.5;
                    halvings += 1;
                }
                Err(e) => fail!(e),
            }
        };
        run.halvings += halvings;
        let spread = match multiplicative_form_check(family, &run.state, &next, rho) {
            Ok(r) => r.spread,
            Err(e) => fail!(e),
        };
        let rel_change = next.relative_change(&run.state);
        let (objective, residual) = match measure(&next) {
            Ok(v) => v,
            Err(e) => fail!(e),
        };
        let mut next = next;
        if let Some(o) = objective {
            next.objective_trace.push(o);
        }
        run.state = next;
        run.rows.push(BlrRow {
            iter: run.state.t,
            rho: Some(rho),
            objective,
            residual,
            rel_change: Some(rel_change),
            multiplicative_spread: Some(spread),
        });
        run.wall_time.push(start.elapsed().as_secs_f64());
        if !stochastic && (rel_change <= cfg.tol || residual <= cfg.tol) {
            run.converged = true;
            break;
        }
    }
    Ok(run)
}

/// A model built from its spec, with its data.
pub enum BuiltModel {
    Ridge(RidgeModel),
    Logistic(LogisticModel),
    Mlp(MlpModel),
}

impl BuiltModel {
    pub fn build(spec: &ModelSpec) -> Result<Self> {
        let data = spec.dataset()?;
        Ok(match spec {
            ModelSpec::Ridge { prior_precision, .. } => {
                BuiltModel::Ridge(RidgeModel::new(data.x, data.y, prior_precision.unwrap_or(1.0))?)
            }
            ModelSpec::Logistic { .. } => BuiltModel::Logistic(LogisticModel::new(data.x, data.y)?),
            ModelSpec::Mlp { layers, activation, .. } => {
                BuiltModel::Mlp(MlpModel::new(layers.clone(), *activation, data)?)
            }
        })
    }

    pub fn fit(&self) -> &dyn DataFit {
        match self {
            BuiltModel::Ridge(m) => m,
            BuiltModel::Logistic(m) => m,
            BuiltModel::Mlp(m) => m,
        }
    }

    pub fn dim(&self) -> usize {
        self.fit().dim()
    }

    /// Initial parameters from an optional seed.
    pub fn init_params(&self, seed: Option<u64>) -> DVector<f64> {
        match (self, seed) {
            (BuiltModel::Mlp(m), s) => m.init_params(s.unwrap_or(0)),
            (_, None) => DVector::zeros(self.dim()),
            (_, Some(s)) => {
                let mut rng = rng_from_seed(s, INIT_STREAM);
                DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal))
            }
        }
    }
}

/// Outcome of one `run`: exit code, artifact directory (if any) and summary.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub dir: Option<PathBuf>,
    pub summary: Option<Value>,
    pub message: String,
}

impl RunOutcome {
    fn config_error(e: Error) -> Self {
        Self { exit_code: EXIT_CONFIG, dir: None, summary: None, message: format!("config error: {e}") }
    }
}

/// Any trace a run produced, for joint export.
pub enum Trace {
    Blr(BlrRun),
    Train(TrainRunRecord),
}

impl Trace {
    pub fn csv(&self) -> String {
        match self {
            Trace::Blr(r) => r.to_csv(),
            Trace::Train(r) => r.to_csv(),
        }
    }

    pub fn timing_csv(&self) -> String {
        match self {
            Trace::Blr(r) => r.timing_csv(),
            Trace::Train(r) => r.timing_csv(),
        }
    }

    /// `(step, objective)` pairs: the VB objective for BLR, the mean training loss otherwise.
    pub fn objective_series(&self) -> Vec<(usize, Option<f64>)> {
        match self {
            Trace::Blr(r) => r.rows.iter().map(|row| (row.iter, row.objective)).collect(),
            Trace::Train(r) => r.rows.iter().map(|row| (row.step, Some(row.loss))).collect(),
        }
    }
}

fn blr_init(family: GaussianFamily, model: &BuiltModel, init: &BlrInit) -> Result<NaturalParams> {
    let p = family.dim();
    if p != model.dim() {
        return Err(Error::Config(format!(
            "family dimension {p} does not match the model's {} parameters",
            model.dim()
        )));
    }
    let mean = model.init_params(init.mean_seed).map(|v| if init.mean_seed.is_some() { v } else { 0.0 });
    let moment = match family {
        GaussianFamily::Full(_) => GaussianMoment::full(mean, DMatrix::identity(p, p) * init.precision),
        GaussianFamily::Diagonal(_) => GaussianMoment::diagonal(mean, DVector::from_element(p, init.precision)),
    };
    family.moment_to_natural(&moment)
}

fn check_derivatives<L: LossModel + ?Sized>(loss: &L, at: &DVector<f64>) -> Result<()> {
    let check = verify_derivatives(loss, at);
    if check.passed() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "derivative verifier rejected the model: gradient rel err {:e}, Hessian rel err {:?}",
            check.gradient_rel_err, check.hessian_rel_err
        )))
    }
}

fn estimator_seed(e: &Estimator) -> Option<u64> {
    match e {
        Estimator::Mc { seed, .. } => Some(*seed),
        _ => None,
    }
}

/// Why [`execute`] stopped.
pub enum ExecError {
    /// Invalid config or data; nothing was run.
    Config(Error),
    /// The run started and failed; `partial` holds what was recorded.
    Domain { error: Error, summary: Value, partial: Option<Box<Trace>> },
}

/// Executes a validated config and returns its trace and summary without touching disk.
pub fn execute(cfg: &ExperimentConfig) -> std::result::Result<(Trace, Value), ExecError> {
    let model = BuiltModel::build(&cfg.model).map_err(ExecError::Config)?;
    let mut summary = json!({
        "name": cfg.run_name(),
        "method": cfg.run.method(),
        "model": cfg.model.kind(),
        "config_hash": cfg.hash(),
        "rng": cfg.rng,
    });
    let domain = |error: Error, mut summary: Value, partial: Option<Trace>| {
        let partial = partial.map(Box::new);
        summary["status"] = json!("failed");
        summary["error"] = json!(error.to_string());
        ExecError::Domain { error, summary, partial }
    };

    match &cfg.run {
        RunSpec::Blr { family, blr, init } => {
            let lambda0 = blr_init(*family, &model, init).map_err(ExecError::Config)?;
            let tau = cfg.model.prior_precision().unwrap_or(1.0);
            let ridge_loss;
            let penalized;
            let loss: &dyn LossModel = match &model {
                BuiltModel::Ridge(r) => {
                    ridge_loss = r.loss();
                    &ridge_loss
                }
                other => {
                    penalized = Penalized::new(other.fit(), tau);
                    &penalized
                }
            };
            summary["seed"] = json!(estimator_seed(&blr.estimator));
            let probe = family.mean(&lambda0).map_err(ExecError::Config)?;
            if let Err(e) = check_derivatives(loss, &probe) {
                return Err(domain(e, summary, None));
            }
            match run_blr(*family, loss, blr, lambda0) {
                Ok(run) => {
                    fill_blr_summary(&mut summary, &run, *family);
                    summary["status"] = json!("ok");
                    Ok((Trace::Blr(run), summary))
                }
                Err(f) => {
                    if let Some(p) = &f.partial {
                        fill_blr_summary(&mut summary, p, *family);
                    }
                    Err(domain(f.error, summary, f.partial.map(|p| Trace::Blr(*p))))
                }
            }
        }
        RunSpec::Train { train: tcfg, budget, init_seed } => {
            let fit = model.fit();
            let init = model.init_params(*init_seed);
            summary["seed"] = json!(tcfg.seed);
            summary["optimizer_seed"] = json!(match &tcfg.optimizer {
                OptimizerSpec::Von(c) => Some(c.seed),
                OptimizerSpec::Ivon(c) => Some(c.seed),
                _ => None,
            });
            let probe = Penalized::new(fit, fit.num_data() as f64 * tcfg.weight_decay);
            if let Err(e) = check_derivatives(&probe, &init) {
                return Err(domain(e, summary, None));
            }
            match train(fit, init, tcfg, *budget) {
                Ok(rec) => {
                    fill_train_summary(&mut summary, &rec, &model, tcfg.weight_decay);
                    summary["status"] = json!("ok");
                    Ok((Trace::Train(rec), summary))
                }
                Err(f) => {
                    fill_train_summary(&mut summary, &f.partial, &model, tcfg.weight_decay);
                    Err(domain(f.error, summary, Some(Trace::Train(*f.partial))))
                }
            }
        }
    }
}

fn fill_blr_summary(summary: &mut Value, run: &BlrRun, family: GaussianFamily) {
    summary["iterations"] = json!(run.iterations());
    summary["converged"] = json!(run.converged);
    summary["final_objective"] = json!(run.final_objective());
    summary["residual"] = json!(run.final_residual());
    summary["halvings"] = json!(run.halvings);
    summary["max_multiplicative_spread"] = json!(run.max_multiplicative_spread());
    summary["multiplicative_passed"] = json!(run.max_multiplicative_spread() <= MULTIPLICATIVE_TOL);
    summary["final_mean"] = json!(family.mean(&run.state.lambda).ok().map(|m| m.as_slice().to_vec()));
}

fn fill_train_summary(summary: &mut Value, rec: &TrainRunRecord, model: &BuiltModel, weight_decay: f64) {
    let fit = model.fit();
    let grad = fit.batch_gradient(&rec.final_params, &fit.all()) + &rec.final_params * weight_decay;
    summary["iterations"] = json!(rec.rows.last().map(|r| r.step).unwrap_or(0));
    summary["final_objective"] = json!(rec.final_loss());
    summary["residual"] = json!(grad.norm());
    summary["min_scale"] = json!(rec.min_scale());
    if let BuiltModel::Mlp(m) = model {
        summary["final_accuracy"] = json!(m.accuracy(&rec.final_params));
    }
}

fn write_artifacts(dir: &Path, cfg: &ExperimentConfig, trace: &str, timing: &str, summary: &Value) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.json"), cfg.to_json() + "\n")?;
    std::fs::write(dir.join("trace.csv"), trace)?;
    std::fs::write(dir.join("timing.csv"), timing)?;
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(summary).expect("json") + "\n")?;
    Ok(())
}

/// Runs `cfg` and writes `config.json`, `trace.csv`, `timing.csv` and `summary.json`
/// under `out_root/<run name>/`. Config errors write nothing; domain errors flush the
/// partial trace.
pub fn run_experiment(cfg: &ExperimentConfig, out_root: &Path) -> RunOutcome {
    run_experiment_with_trace(cfg, out_root).0
}

/// As [`run_experiment`], also returning the (possibly partial) trace.
pub fn run_experiment_with_trace(cfg: &ExperimentConfig, out_root: &Path) -> (RunOutcome, Option<Trace>) {
    if let Err(e) = cfg.validate() {
        return (RunOutcome::config_error(e), None);
    }
    let dir = out_root.join(cfg.run_name());
    match execute(cfg) {
        Ok((trace, summary)) => {
            let out = match write_artifacts(&dir, cfg, &trace.csv(), &trace.timing_csv(), &summary) {
                Ok(()) => RunOutcome {
                    exit_code: EXIT_OK,
                    message: format!("wrote {}", dir.display()),
                    dir: Some(dir),
                    summary: Some(summary),
                },
                Err(e) => {
                    RunOutcome { exit_code: EXIT_DOMAIN, dir: None, summary: Some(summary), message: e.to_string() }
                }
            };
            (out, Some(trace))
        }
        Err(ExecError::Config(e)) => (RunOutcome::config_error(e), None),
        Err(ExecError::Domain { error, summary, partial }) => {
            let (trace, timing) = partial.as_ref().map(|t| (t.csv(), t.timing_csv())).unwrap_or_default();
            let written = write_artifacts(&dir, cfg, &trace, &timing, &summary).is_ok();
            let out = RunOutcome {
                exit_code: EXIT_DOMAIN,
                dir: written.then_some(dir),
                summary: Some(summary),
                message: format!("run failed: {error}"),
            };
            (out, partial.map(|p| *p))
        }
    }
}

/// Loads and runs a config file.
pub fn run_config_file(path: &Path, out_root: &Path) -> RunOutcome {
    match ExperimentConfig::load(path) {
        Ok(cfg) => run_experiment(&cfg, out_root),
        Err(e) => RunOutcome::config_error(e),
    }
}

/// Runs independent configs on up to `jobs` threads. Outcomes keep the input order.
pub fn run_batch(paths: &[PathBuf], out_root: &Path, jobs: usize) -> Vec<RunOutcome> {
    let jobs = jobs.max(1).min(paths.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: std::sync::Mutex<Vec<Option<RunOutcome>>> = std::sync::Mutex::new(vec![None; paths.len()]);
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= paths.len() {
                    break;
                }
                let out = run_config_file(&paths[i], out_root);
                results.lock().expect("no poisoned runs")[i] = Some(out);
            });
        }
    });
    results.into_inner().expect("no poisoned runs").into_iter().map(|o| o.expect("every job ran")).collect()
}
