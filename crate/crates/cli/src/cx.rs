//! `counterexample`: the exact zone automaton.

use fvmc::counterexample::{run_counterexample, CxParams, CxTrace};
use fvmc::quadratic::ExtendedRational;
use fvmc::{Rational, Scalar};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::args::{Format, GlobalArgs};
use crate::error::{CliError, CliResult};
use crate::io::{config_or_default, print_report, OutDir, FORMAT_VERSION};

/// `rational + sqrt2·√2`, both as rational strings.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadraticText {
    rational: String,
    #[serde(default = "zero_text")]
    sqrt2: String,
}

fn zero_text() -> String {
    "0".into()
}

/// All numbers are strings so they are read exactly.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CxConfig {
    gamma: String,
    q: String,
    u0: String,
    v0: QuadraticText,
    steps: u64,
}

impl Default for CxConfig {
    fn default() -> Self {
        Self {
            gamma: "3/4".into(),
            q: "1/10".into(),
            u0: "9/4".into(),
            v0: QuadraticText { rational: "9/4".into(), sqrt2: "1/100".into() },
            steps: 5000,
        }
    }
}

fn rational(field: &str, text: &str) -> CliResult<Rational> {
    Rational::parse_number(text)
        .map_err(|e| CliError::Usage(format!("counterexample config {field}: {e}")))
}

fn quadratic_json(x: &ExtendedRational) -> Value {
    json!({
        "rational": x.a.to_text(),
        "sqrt2": x.b.to_text(),
        "approx": x.to_f64(),
    })
}

fn summary(cfg: &CxConfig, trace: &CxTrace) -> Value {
    let s = &trace.final_state;
    let audit: Vec<Value> = trace
        .audit
        .iter()
        .enumerate()
        .map(|(a, x)| {
            json!({
                "action": a,
                "updates": x.updates,
                "alpha_sum": x.alpha_sum.to_text(),
                "alpha_sq_sum": x.alpha_sq_sum.to_text(),
                "matches_harmonic": x.matches_harmonic,
            })
        })
        .collect();
    json!({
        "format_version": FORMAT_VERSION,
        "params": {
            "gamma": cfg.gamma,
            "q": cfg.q,
            "u0": cfg.u0,
            "v0": { "rational": cfg.v0.rational, "sqrt2": cfg.v0.sqrt2 },
        },
        "steps": s.k,
        "cycles": trace.cycles,
        "zone_changes": trace.transitions.len(),
        "cyclic_order": trace.cyclic_order(),
        "values_alternate": trace.values_alternate(),
        "policy_values": trace.policy_values.iter().map(Scalar::to_text).collect::<Vec<_>>(),
        "max_denominator_bits": trace.max_denominator_bits,
        "final_state": {
            "k": s.k,
            "zone": s.zone,
            "u": quadratic_json(&s.u),
            "v": quadratic_json(&s.v),
            "l0": s.l0,
            "l1": s.l1,
        },
        "audit": audit,
        "transitions": trace.transitions,
    })
}

pub fn counterexample(global: &GlobalArgs, steps: Option<u64>) -> CliResult<()> {
    let out = OutDir::required(global, "counterexample")?;
    let mut cfg: CxConfig = config_or_default(global)?;
    if let Some(n) = steps {
        cfg.steps = n;
    }
    let params = CxParams::new(
        rational("gamma", &cfg.gamma)?,
        rational("q", &cfg.q)?,
        ExtendedRational::rational(rational("u0", &cfg.u0)?),
        ExtendedRational::new(rational("v0.rational", &cfg.v0.rational)?, rational("v0.sqrt2", &cfg.v0.sqrt2)?),
    )?;
    let trace = run_counterexample(&params, cfg.steps)?;
    match global.table_format() {
        Format::Csv => {
            let mut buf = Vec::new();
            trace.write_csv(&mut buf).map_err(|e| CliError::io("counterexample.csv", e))?;
            out.write("counterexample.csv", &buf)?;
        }
        Format::Json => {
            let doc = json!({ "format_version": FORMAT_VERSION, "records": trace.records });
            out.write_json("counterexample_trace.json", &doc)?;
        }
    }
    let report = summary(&cfg, &trace);
    out.write_json("counterexample.json", &report)?;
    print_report(&report);
    Ok(())
}
