//! `solve`, `validate` and `gen-mdp`.

use std::path::Path;

use fvmc::control::SOLVE_TOL;
use fvmc::episode::{check_absorbing, AbsorbingSpec, AbsorbingViolation};
use fvmc::mdp::{parts_from_document, validate_parts, Finding};
use fvmc::random::RandomMdpSpec;
use fvmc::solver::{policy_iteration, value_iteration};
use fvmc::{Mdp, Rational, Scalar};
use serde_json::{json, Value};

use crate::args::{Format, GlobalArgs};
use crate::error::{CliError, CliResult};
use crate::io::{self, config_or_default, csv_bytes, emit_text, read_document, FORMAT_VERSION};

struct ExactSolution {
    v: Vec<Rational>,
    q: Vec<Vec<Rational>>,
    policy: Vec<usize>,
}

pub fn solve(global: &GlobalArgs, path: &Path, float_only: bool) -> CliResult<()> {
    let doc = read_document(path)?;
    let m: Mdp<f64> = Mdp::from_document(&doc)?;
    let (v, q) = value_iteration(&m, SOLVE_TOL)?;
    // Decimal probabilities that only sum to one within the float tolerance
    // have no exact reading; those files get the float solution alone.
    let exact = if float_only {
        None
    } else {
        match Mdp::<Rational>::from_document(&doc) {
            Ok(mx) => {
                let (v, q, policy) = policy_iteration(&mx)?;
                Some(ExactSolution { v: v.values, q: q.rows, policy })
            }
            Err(fvmc::Error::InvalidMdp(_)) => None,
            Err(e) => return Err(e.into()),
        }
    };
    let greedy = |x: usize| match &exact {
        Some(e) => e.policy[x],
        None => q.argmax(x)[0],
    };

    match global.table_format() {
        Format::Json => {
            let states: Vec<Value> = (0..m.n_states())
                .map(|x| {
                    let mut row = json!({
                        "state": m.state_name(x),
                        "v_star": v.values[x],
                        "greedy_action": m.action_name(x, greedy(x)),
                    });
                    if let Some(e) = &exact {
                        row["v_star_exact"] = json!(e.v[x].to_text());
                    }
                    row
                })
                .collect();
            let pairs: Vec<Value> = m
                .pairs()
                .map(|(x, a)| {
                    let mut row = json!({
                        "state": m.state_name(x),
                        "action": m.action_name(x, a),
                        "q_star": q.rows[x][a],
                    });
                    if let Some(e) = &exact {
                        row["q_star_exact"] = json!(e.q[x][a].to_text());
                    }
                    row
                })
                .collect();
            let report = json!({
                "format_version": FORMAT_VERSION,
                "gamma": m.gamma(),
                "exact": exact.is_some(),
                "states": states,
                "pairs": pairs,
            });
            emit_text(global, "solve.json", &io::pretty(&report))
        }
        Format::Csv => {
            let rows = m.pairs().map(|(x, a)| {
                let (qe, ve) = match &exact {
                    Some(e) => (e.q[x][a].to_text(), e.v[x].to_text()),
                    None => (String::new(), String::new()),
                };
                vec![
                    m.state_name(x).to_string(),
                    m.action_name(x, a).to_string(),
                    io::num(q.rows[x][a]),
                    qe,
                    io::num(v.values[x]),
                    ve,
                    m.action_name(x, greedy(x)).to_string(),
                ]
            });
            let header = ["state", "action", "q_star", "q_star_exact", "v_star", "v_star_exact", "greedy_action"];
            let bytes = csv_bytes(&header, rows)?;
            emit_text(global, "solve.csv", &String::from_utf8(bytes).expect("csv is utf-8"))
        }
    }
}

fn absorbing_finding(m: &Mdp<f64>, v: &AbsorbingViolation) -> Finding {
    let name = |x: usize| m.state_names().get(x).map_or_else(|| x.to_string(), |s| format!("{s:?}"));
    match *v {
        AbsorbingViolation::UnknownState { state } => {
            Finding::new("absorbing_unknown_state", format!("triangle index {state} out of range"))
        }
        AbsorbingViolation::NonzeroReward { state, action, next } => Finding::new(
            "absorbing_nonzero_reward",
            format!(
                "reward of ({}, {:?}) -> {} in the triangle is not the point mass at 0",
                name(state),
                m.action_name(state, action),
                name(next)
            ),
        ),
        AbsorbingViolation::NotClosed { state, action } => Finding::new(
            "absorbing_not_closed",
            format!("({}, {:?}) can leave the triangle", name(state), m.action_name(state, action)),
        ),
        AbsorbingViolation::Unreachable { state } => {
            Finding::new("absorbing_unreachable", format!("no path from {} to the triangle", name(state)))
        }
    }
}

/// Model invariants use the float backend, as the runs do; the absorbing
/// check runs only on an otherwise valid model.
pub fn validate(global: &GlobalArgs, path: &Path) -> CliResult<()> {
    io::only_json(global, "validate")?;
    let doc = read_document(path)?;
    let (findings, parts) = match parts_from_document::<f64>(&doc) {
        Ok(parts) => (validate_parts(&parts).findings, Some(parts)),
        Err(fvmc::Error::InvalidMdp(report)) => (report.findings, None),
        Err(e) => return Err(e.into()),
    };
    let mut findings = findings;
    let mut absorbing_checked = false;
    if let (true, Some(parts)) = (findings.is_empty(), parts) {
        let m = Mdp::new(parts)?;
        if let Some(spec) = AbsorbingSpec::from_mdp(&m) {
            absorbing_checked = true;
            let report = check_absorbing(&m, &spec);
            findings.extend(report.violations.iter().map(|v| absorbing_finding(&m, v)));
        }
    }
    let report = json!({
        "format_version": FORMAT_VERSION,
        "path": path.display().to_string(),
        "valid": findings.is_empty(),
        "absorbing_checked": absorbing_checked,
        "findings": findings,
    });
    emit_text(global, "validate.json", &io::pretty(&report))?;
    if findings.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation { context: path.display().to_string(), findings })
    }
}

pub fn gen_mdp(global: &GlobalArgs) -> CliResult<()> {
    io::only_json(global, "gen-mdp")?;
    let mut spec: RandomMdpSpec = config_or_default(global)?;
    if let Some(seed) = global.seed {
        spec.seed = seed;
    }
    let m: Mdp<Rational> = spec.generate()?;
    let mut text = m.to_json_string()?;
    text.push('\n');
    emit_text(global, "mdp.json", &text)
}
