mod common;

use std::path::Path;

use common::*;
use serde_json::Value;

fn schema_for(file: &str) -> &'static str {
    let stem = file.trim_end_matches(".json");
    let numbered = |prefix: &str| stem.strip_prefix(prefix).is_some_and(|r| r.chars().all(|c| c.is_ascii_digit()));
    match stem {
        _ if numbered("q_r") => "q_table",
        _ if numbered("audit_r") => "audit",
        _ if numbered("trace_r") => "trace",
        _ if numbered("robbins_monro_s") || numbered("abstract_sa_s") => "trajectory",
        "summary" => "run_summary",
        "solve" => "solve",
        "validate" => "validate",
        "couple_check" => "couple_check",
        "counterexample" => "counterexample",
        "counterexample_trace" => "counterexample_trace",
        "contraction" => "contraction",
        "contraction_cases" => "contraction_cases",
        "robbins_monro" => "robbins_monro",
        "abstract_sa" => "abstract_sa",
        "mdp" => "mdp",
        other => panic!("no schema for {other}"),
    }
}

fn check(schema: &str, doc: &Value, what: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{schema}.schema.json"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{what} violates {}: {errors:#?}", path.display());
}

/// Every JSON document the subcommands emit validates against its schema.
#[test]
fn emitted_json_matches_the_shipped_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = d.join("out");
    let o = s(&out);
    let cx = write(d, "cx.json", CX_MDP);
    let mdp = absorbing_mdp(d, "m.json", 2);
    let exp = write(d, "exp.json", r#"{"mdp": "m.json", "episodes": 300, "replicates": 2, "stride": 100, "tolerance": 0.1}"#);
    let rm = write(d, "rm.json", r#"{"steps": 2000, "seeds": 2, "stride": 500}"#);
    let sa = write(
        d,
        "sa.json",
        r#"{"map": {"kind": "sup_norm_shrink", "f_star": ["1", "-1/3", 2], "rho": "1/2"},
            "eta": {"rule": "harmonic", "offset": 1}, "steps": 300, "seeds": 2, "stride": 50}"#,
    );
    let sa_op = write(d, "sa_op.json", r#"{"map": {"kind": "policy_operator", "mdp": {"n_states": 2, "max_actions": 2, "gamma": 0.3}}, "steps": 200}"#);
    let couple = write(d, "couple.json", r#"{"mdp": "m.json", "episodes": 50, "replicates": 2}"#);

    let runs: Vec<(Vec<&str>, &str)> = vec![
        (vec!["solve", s(&cx)], "solve"),
        (vec!["validate", s(&mdp)], "validate"),
        (vec!["gen-mdp", "--seed", "9"], "mdp"),
        (vec!["run-fva", "--config", s(&exp)], "run_summary"),
        (vec!["run-general", "--config", s(&exp)], "run_summary"),
        (vec!["couple-check", "--config", s(&couple)], "couple_check"),
        (vec!["counterexample", "--steps", "300"], "counterexample"),
        (vec!["check-contraction", "--count", "5"], "contraction"),
        (vec!["check-robbins-monro", "--config", s(&rm)], "robbins_monro"),
        (vec!["check-abstract-sa", "--config", s(&sa)], "abstract_sa"),
        (vec!["check-abstract-sa", "--config", s(&sa_op)], "abstract_sa"),
    ];
    for (mut args, schema) in runs {
        args.extend(["--format", "json", "--out-dir", o]);
        let stdout = stdout_json(&ok(&args));
        check(schema, &stdout, &format!("stdout of {args:?}"));
    }

    let mut seen = std::collections::BTreeSet::new();
    for entry in std::fs::read_dir(&out).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        assert!(name.ends_with(".json"), "--format json wrote {name}");
        let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let schema = schema_for(&name);
        check(schema, &doc, &name);
        seen.insert(schema);
    }
    assert_eq!(seen.len(), 15, "{seen:?}");

    let err = fvmc(&["validate", s(&d.join("absent.json"))]);
    check("error", &stderr_json(&err), "stderr");
    let bad = write(d, "bad.json", &CX_MDP.replace(r#"{"e": 1}"#, r#"{"e": 0.5}"#));
    let err = fvmc(&["validate", s(&bad)]);
    check("error", &stderr_json(&err), "stderr");
    check("validate", &stdout_json(&err), "failed validation report");
}

#[test]
fn schemas_accept_the_mdp_format_and_reject_drift() {
    check("mdp", &serde_json::from_str(CX_MDP).unwrap(), "CX_MDP");
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas/solve.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let good = serde_json::json!({"format_version": 1, "gamma": 0.5, "exact": false, "states": [], "pairs": []});
    assert!(validator.is_valid(&good));
    for bad in [
        serde_json::json!({"format_version": 2, "gamma": 0.5, "exact": false, "states": [], "pairs": []}),
        serde_json::json!({"format_version": 1, "gamma": 0.5, "states": [], "pairs": []}),
        serde_json::json!({"format_version": 1, "gamma": 0.5, "exact": false, "states": [], "pairs": [], "x": 1}),
    ] {
        assert!(!validator.is_valid(&bad), "{bad}");
    }
}
