use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::run::{run_experiment_with_trace, RunOutcome, Trace};

/// Long-format CSV `run,step,objective` over several traces.
pub fn joint_csv(runs: &[(String, &Trace)]) -> String {
    let mut out = String::from("run,step,objective\n");
    for (label, trace) in runs {
        for (step, obj) in trace.objective_series() {
            let cell = obj.map(|v| format!("{v:?}")).unwrap_or_default();
            writeln!(out, "{label},{step},{cell}").unwrap();
        }
    }
    out
}

/// Runs both configs (writing their usual artifacts) and writes
/// `compare-<hashA>-<hashB>.csv` under `out_root`.
pub fn compare_configs(
    a: &ExperimentConfig,
    b: &ExperimentConfig,
    out_root: &Path,
) -> Result<(PathBuf, [RunOutcome; 2])> {
    let (out_a, trace_a) = run_experiment_with_trace(a, out_root);
    let (out_b, trace_b) = run_experiment_with_trace(b, out_root);
    let (Some(ta), Some(tb)) = (trace_a, trace_b) else {
        let failed = if out_a.exit_code != 0 { &out_a } else { &out_b };
        return Err(Error::Config(format!("compare: a run produced no trace: {}", failed.message)));
    };
    let (mut la, mut lb) = (a.run_name(), b.run_name());
    if la == lb {
        la.push_str("-a");
        lb.push_str("-b");
    }
    let csv = joint_csv(&[(la, &ta), (lb, &tb)]);
    std::fs::create_dir_all(out_root)?;
    let path = out_root.join(format!("compare-{}-{}.csv", a.hash(), b.hash()));
    std::fs::write(&path, csv)?;
    Ok((path, [out_a, out_b]))
}
