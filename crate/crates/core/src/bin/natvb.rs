use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use natvb::harness::{
    compare_configs, out_dir_from_env, ridge_oracle_json, run_batch, verify_suite, ExperimentConfig, RunOutcome,
    Sabotage, Scope, EXIT_CONFIG, EXIT_FAILED_CHECK, OUT_DIR_ENV,
};

#[derive(Parser)]
#[command(name = "natvb", version, about = "Natural-gradient variational Bayes experiments")]
#[command(after_help = format!("Artifacts go to ${OUT_DIR_ENV} (default ./runs)."))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more experiment configs.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Parallel workers for batch runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run the self-verification suite and print a pass/fail table.
    Verify {
        #[arg(long, default_value = "all")]
        scope: String,
        /// Inject a known fault (eq4 | entropy-sign, one-step) to confirm the suite catches it.
        #[arg(long)]
        sabotage: Option<String>,
    },
    /// Run two configs and write a joint objective CSV.
    Compare { a: PathBuf, b: PathBuf },
    /// Print closed-form posteriors.
    Oracle {
        #[command(subcommand)]
        which: OracleKind,
    },
}

#[derive(Subcommand)]
enum OracleKind {
    /// Exact ridge posterior for a ridge config.
    Ridge { config: PathBuf },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c.clamp(0, 255) as u8)
}

fn report(out: &RunOutcome) {
    if out.exit_code == 0 {
        println!("{}", out.message);
    } else {
        eprintln!("{}", out.message);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_root = out_dir_from_env();
    match cli.command {
        Command::Run { configs, jobs } => {
            let outcomes = run_batch(&configs, &out_root, jobs);
            outcomes.iter().for_each(report);
            code(outcomes.iter().map(|o| o.exit_code).max().unwrap_or(0))
        }
        Command::Verify { scope, sabotage } => {
            let parsed =
                scope.parse::<Scope>().and_then(|s| Ok((s, sabotage.map(|x| x.parse::<Sabotage>()).transpose()?)));
            let (scope, sabotage) = match parsed {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("{e}");
                    return code(EXIT_CONFIG);
                }
            };
            let report = verify_suite(scope, sabotage);
            print!("{}", report.table());
            code(if report.passed() { 0 } else { EXIT_FAILED_CHECK })
        }
        Command::Compare { a, b } => {
            let load = |p: &PathBuf| ExperimentConfig::load(p);
            let (ca, cb) = match (load(&a), load(&b)) {
                (Ok(ca), Ok(cb)) => (ca, cb),
                (Err(e), _) | (_, Err(e)) => {
                    eprintln!("config error: {e}");
                    return code(EXIT_CONFIG);
                }
            };
            match compare_configs(&ca, &cb, &out_root) {
                Ok((path, outcomes)) => {
                    outcomes.iter().for_each(report);
                    println!("wrote {}", path.display());
                    code(outcomes.iter().map(|o| o.exit_code).max().unwrap_or(0))
                }
                Err(e) => {
                    eprintln!("{e}");
                    code(EXIT_CONFIG)
                }
            }
        }
        Command::Oracle { which: OracleKind::Ridge { config } } => {
            match ExperimentConfig::load(&config).and_then(|c| ridge_oracle_json(&c)) {
                Ok(v) => {
                    println!("{}", serde_json::to_string_pretty(&v).expect("json"));
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{e}");
                    code(EXIT_CONFIG)
                }
            }
        }
    }
}
