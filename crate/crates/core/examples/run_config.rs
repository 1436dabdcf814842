//! Runs every bundled config under `configs/` and prints one line per run.
//!
//! Output goes to `$NATVB_OUT_DIR` (default `runs/`).

use natvb::harness::{out_dir_from_env, run_batch};

fn main() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut paths: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    for out in run_batch(&paths, &out_dir_from_env(), 1) {
        println!("[{}] {}", out.exit_code, out.message);
    }
}
