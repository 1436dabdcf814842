//! Experiment configs, runners, artifact export and the self-verification suite.

mod compare;
mod config;
mod oracle;
mod run;
mod verify;

pub use compare::{compare_configs, joint_csv};
pub use config::{BlrInit, DataSpec, ExperimentConfig, ModelSpec, RunSpec, SCHEMA_VERSION};
pub use oracle::{ridge_oracle, ridge_oracle_json};
pub use run::{
    execute, out_dir_from_env, run_batch, run_blr, run_config_file, run_experiment, run_experiment_with_trace,
    BlrFailure, BlrRow, BlrRun, BuiltModel, ExecError, RunOutcome, Trace, DEFAULT_OUT_DIR, EXIT_CONFIG, EXIT_DOMAIN,
    EXIT_FAILED_CHECK, EXIT_OK, MAX_HALVINGS, OUT_DIR_ENV,
};
pub use verify::{verify_suite, CheckResult, Sabotage, Scope, VerifyReport};
