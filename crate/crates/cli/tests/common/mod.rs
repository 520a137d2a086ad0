#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub const CX_MDP: &str = r#"{
  "gamma": "3/4",
  "states": ["e"],
  "actions": {"e": ["0", "1"]},
  "transitions": {"e|0": {"e": 1}, "e|1": {"e": 1}},
  "rewards": {"e|0|e": [[0, 1]], "e|1|e": [[1, 1]]}
}"#;

pub fn fvmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fvmc")).args(args).output().expect("binary runs")
}

pub fn ok(args: &[&str]) -> Output {
    let out = fvmc(args);
    assert!(
        out.status.success(),
        "fvmc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

pub fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Seeded random MDP with an absorbing set, written to `dir/name`.
pub fn absorbing_mdp(dir: &Path, name: &str, seed: u64) -> PathBuf {
    let spec = write(
        dir,
        &format!("{name}.spec.json"),
        r#"{"n_states": 4, "max_actions": 2, "gamma": 0.5, "branching": 2, "absorbing_fraction": 0.25}"#,
    );
    let out = ok(&["gen-mdp", "--config", s(&spec), "--seed", &seed.to_string()]);
    let path = dir.join(name);
    std::fs::write(&path, &out.stdout).unwrap();
    path
}
