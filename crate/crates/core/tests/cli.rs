use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const RIDGE: &str = r#"{"schema_version": 1, "name": "ridge",
  "model": {"kind": "ridge", "data": {"source": "synthetic", "n": 30, "p": 3, "seed": 1}, "prior_precision": 2.0},
  "run": {"method": "blr", "family": {"covariance": "full", "dim": 3},
          "blr": {"schedule": {"kind": "constant", "rho": 1.0}, "estimator": {"kind": "exact"}}}}"#;

const RIDGE_SLOW: &str = r#"{"schema_version": 1, "name": "ridge-slow",
  "model": {"kind": "ridge", "data": {"source": "synthetic", "n": 30, "p": 3, "seed": 1}, "prior_precision": 2.0},
  "run": {"method": "blr", "family": {"covariance": "full", "dim": 3},
          "blr": {"schedule": {"kind": "constant", "rho": 0.3}, "estimator": {"kind": "exact"}}}}"#;

// The precision floor sits above the initial precision, so the first step leaves the domain.
const VON_LEAVES_DOMAIN: &str = r#"{"schema_version": 1, "name": "von-floor",
  "model": {"kind": "logistic", "data": {"source": "synthetic", "n": 40, "p": 2, "seed": 3}},
  "run": {"method": "train", "budget": 20,
          "train": {"optimizer": {"kind": "von", "schedule": {"kind": "constant", "rho": 0.5}, "min_precision": 1e12}}}}"#;

struct Sandbox {
    dir: TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_natvb")).args(args).env("NATVB_OUT_DIR", self.out()).output().unwrap()
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_writes_all_artifacts() {
    let sb = Sandbox::new();
    let cfg = sb.write("ridge.json", RIDGE);
    let o = sb.run(&["run", s(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = sb.out().join("ridge");
    for f in ["config.json", "trace.csv", "timing.csv", "summary.json"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "ok");
    assert_eq!(summary["iterations"], 1);
    let trace = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iter,rho,objective,residual,rel_change,multiplicative_spread\n"));
}

#[test]
fn malformed_config_exits_2_without_artifacts() {
    let sb = Sandbox::new();
    let bad = sb.write("bad.json", &RIDGE.replace("\"schema_version\": 1,", "\"schema_version\": 1, \"bogus\": true,"));
    let o = sb.run(&["run", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!sb.out().exists() || std::fs::read_dir(sb.out()).unwrap().next().is_none());

    let o = sb.run(&["run", s(&sb.dir.path().join("missing.json"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn domain_failure_exits_3_and_keeps_partial_trace() {
    let sb = Sandbox::new();
    let cfg = sb.write("von.json", VON_LEAVES_DOMAIN);
    let o = sb.run(&["run", s(&cfg)]);
    assert_eq!(o.status.code(), Some(3));
    let dir = sb.out().join("von-floor");
    let trace = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2, "header plus the initial row");
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "failed");
    assert!(summary["error"].as_str().unwrap().contains("precision"));
}

#[test]
fn verify_passes_and_sabotage_is_caught() {
    let sb = Sandbox::new();
    let o = sb.run(&["verify", "--scope", "conjugate"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("one_step_bayes"));

    let o = sb.run(&["verify", "--scope", "expfam", "--sabotage", "eq4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));

    let o = sb.run(&["verify", "--scope", "conjugate", "--sabotage", "one-step"]);
    assert_eq!(o.status.code(), Some(1));

    assert_eq!(sb.run(&["verify", "--scope", "nonsense"]).status.code(), Some(2));
    assert_eq!(sb.run(&["verify", "--sabotage", "nonsense"]).status.code(), Some(2));
}

#[test]
fn oracle_ridge_matches_one_step_blr() {
    let sb = Sandbox::new();
    let cfg = sb.write("ridge.json", RIDGE);
    let o = sb.run(&["oracle", "ridge", s(&cfg)]);
    assert_eq!(o.status.code(), Some(0));
    let oracle: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(sb.run(&["run", s(&cfg)]).status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(sb.out().join("ridge/summary.json")).unwrap()).unwrap();
    let a = oracle["mean"].as_array().unwrap();
    let b = summary["final_mean"].as_array().unwrap();
    assert_eq!(a.len(), 3);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
        assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
    }

    let logistic = sb.write("logistic.json", &VON_LEAVES_DOMAIN.replace("von-floor", "x"));
    assert_eq!(sb.run(&["oracle", "ridge", s(&logistic)]).status.code(), Some(2));
}

#[test]
fn compare_writes_joint_csv() {
    let sb = Sandbox::new();
    let a = sb.write("a.json", RIDGE);
    let b = sb.write("b.json", RIDGE_SLOW);
    let o = sb.run(&["compare", s(&a), s(&b)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv_path = std::fs::read_dir(sb.out())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_str().unwrap().starts_with("compare-"))
        .expect("joint csv");
    let csv = std::fs::read_to_string(csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("run,step,objective"));
    let runs: std::collections::BTreeSet<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(runs.len(), 2);
}

#[test]
fn batch_run_with_jobs_keeps_every_run_and_worst_exit_code() {
    let sb = Sandbox::new();
    let a = sb.write("a.json", RIDGE);
    let b = sb.write("b.json", RIDGE_SLOW);
    let c = sb.write("c.json", VON_LEAVES_DOMAIN);
    let o = sb.run(&["run", "--jobs", "2", s(&a), s(&b), s(&c)]);
    assert_eq!(o.status.code(), Some(3));
    for name in ["ridge", "ridge-slow", "von-floor"] {
        assert!(sb.out().join(name).join("summary.json").is_file(), "{name}");
    }
}
