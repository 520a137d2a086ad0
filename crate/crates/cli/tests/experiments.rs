mod common;

use std::collections::BTreeMap;
use std::path::Path;

use common::*;
use serde_json::Value;

fn experiment(dir: &Path, mdp: &Path, extra: &str) -> std::path::PathBuf {
    let text = format!(
        r#"{{"mdp": "{}", "theta": 1.0, "episodes": 1500, "replicates": 3, "master_seed": 5, "stride": 500,
            "tolerance": 0.5{extra}}}"#,
        mdp.file_name().unwrap().to_str().unwrap()
    );
    write(dir, "experiment.json", &text)
}

fn q_star_by_pair(solve: &Value) -> BTreeMap<(String, String), f64> {
    solve["pairs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| {
            let key = (p["state"].as_str().unwrap().to_string(), p["action"].as_str().unwrap().to_string());
            (key, p["q_star"].as_f64().unwrap())
        })
        .collect()
}

/// The dumped Q table and the solver output reproduce the trace's last row.
#[test]
fn run_fva_dump_recomputes_the_final_error() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = absorbing_mdp(dir.path(), "m.json", 2);
    let cfg = experiment(dir.path(), &mdp, "");
    let out_dir = dir.path().join("out");
    let summary = stdout_json(&ok(&["run-fva", "--config", s(&cfg), "--out-dir", s(&out_dir)]));
    let q_star = q_star_by_pair(&stdout_json(&ok(&["solve", s(&mdp), "--format", "json"])));

    for r in 0..3 {
        let table: Value =
            serde_json::from_str(&std::fs::read_to_string(out_dir.join(format!("q_r{r}.json"))).unwrap()).unwrap();
        let recomputed = table["pairs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| {
                let key = (p["state"].as_str().unwrap().to_string(), p["action"].as_str().unwrap().to_string());
                (p["q"].as_f64().unwrap() - q_star[&key]).abs()
            })
            .fold(0.0, f64::max);

        let mut reader = csv::Reader::from_path(out_dir.join(format!("trace_r{r}.csv"))).unwrap();
        let last = reader.records().last().unwrap().unwrap();
        assert_eq!(&last[0], "1500");
        let traced: f64 = last[1].parse().unwrap();
        assert!((recomputed - traced).abs() <= 1e-12, "replicate {r}: {recomputed} vs {traced}");
        assert_eq!(summary["final_q_errors"][r].as_f64().unwrap(), traced);
    }
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn runs_are_byte_identical_across_repeats_and_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = absorbing_mdp(dir.path(), "m.json", 4);
    for (command, extra) in [("run-fva", ""), ("run-general", r#", "start": "pairs", "alpha_exponent": 0.8"#)] {
        let cfg = experiment(dir.path(), &mdp, extra);
        let mut outputs = Vec::new();
        for (i, jobs) in ["1", "1", "3"].iter().enumerate() {
            let out = dir.path().join(format!("{command}-{i}"));
            let stdout = ok(&[command, "--config", s(&cfg), "--out-dir", s(&out), "--jobs", jobs]).stdout;
            outputs.push((stdout, dir_contents(&out)));
        }
        assert_eq!(outputs[0], outputs[1], "{command}: repeat differs");
        assert_eq!(outputs[0], outputs[2], "{command}: worker count changes the output");
        assert_eq!(outputs[0].1.len(), 1 + 3 * 3);
    }
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = absorbing_mdp(dir.path(), "m.json", 1);
    let cfg = experiment(dir.path(), &mdp, "");
    let a = stdout_json(&ok(&["run-fva", "--config", s(&cfg), "--out-dir", s(&dir.path().join("a"))]));
    let b = stdout_json(&ok(&["run-fva", "--config", s(&cfg), "--out-dir", s(&dir.path().join("b")), "--seed", "6"]));
    assert_eq!(a["master_seed"], 5);
    assert_eq!(b["master_seed"], 6);
    assert_ne!(a["final_q_errors"], b["final_q_errors"]);
}

#[test]
fn finite_episode_runs_need_a_triangle() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = write(dir.path(), "cx.json", CX_MDP);
    let cfg = experiment(dir.path(), &mdp, r#", "algorithm": "fva_finite""#);
    let out = fvmc(&["run-fva", "--config", s(&cfg), "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));

    let cfg = experiment(dir.path(), &mdp, r#", "algorithm": "general""#);
    let out = fvmc(&["run-fva", "--config", s(&cfg), "--out-dir", s(dir.path())]);
    assert_eq!(stderr_json(&out)["error"]["kind"], "usage");
}

#[test]
fn exact_backend_reports_rational_q_values() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "cx.json", CX_MDP);
    let text = r#"{"mdp": "cx.json", "episodes": 20, "stride": 10, "backend": "exact", "gamma_override": "1/2"}"#;
    let cfg = write(dir.path(), "exact.json", text);
    let out_dir = dir.path().join("out");
    let summary = stdout_json(&ok(&["run-fva", "--config", s(&cfg), "--out-dir", s(&out_dir)]));
    assert_eq!(summary["gamma"], 0.5);
    let table: Value = serde_json::from_slice(&std::fs::read(out_dir.join("q_r0.json")).unwrap()).unwrap();
    for p in table["pairs"].as_array().unwrap() {
        let exact = p["q_exact"].as_str().unwrap();
        assert!(exact.chars().all(|c| c.is_ascii_digit() || c == '/' || c == '-'), "{exact}");
    }
}

#[test]
fn couple_check_agrees_on_generated_instances() {
    let dir = tempfile::tempdir().unwrap();
    absorbing_mdp(dir.path(), "m.json", 3);
    let cfg = write(dir.path(), "c.json", r#"{"mdp": "m.json", "episodes": 200, "replicates": 3}"#);
    let report = stdout_json(&ok(&["couple-check", "--config", s(&cfg)]));
    assert_eq!(report["agreed"], true);
    assert_eq!(report["replicates"].as_array().unwrap().len(), 3);

    let plain = write(dir.path(), "cx.json", CX_MDP);
    let cfg = write(dir.path(), "c2.json", r#"{"mdp": "cx.json", "episodes": 5}"#);
    let out = fvmc(&["couple-check", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2), "{plain:?} has no triangle");
}
