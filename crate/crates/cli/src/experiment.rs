//! `run-fva`, `run-general` and `couple-check`.

use std::path::{Path, PathBuf};

use fvmc::control::{
    check_cqdev, couple_alg2_alg3, return_horizon, run, validated_triangle, Algorithm, CouplingReport, RunConfig,
    RunOutcome, StartChoice, DEFAULT_STRIDE,
};
use fvmc::episode::StartDist;
use fvmc::mdp::NumberText;
use fvmc::{Mdp, Rational, Scalar, SeedSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::{Format, GlobalArgs};
use crate::error::{CliError, CliResult};
use crate::io::{self, load_mdp, print_report, read_json, relative_to, require_config, OutDir, FORMAT_VERSION};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Float,
    Exact,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// MDP file, relative to the config file.
    pub mdp: PathBuf,
    pub algorithm: Option<Algorithm>,
    pub gamma_override: Option<NumberText>,
    #[serde(default = "unit")]
    pub theta: f64,
    pub episodes: u64,
    #[serde(default = "one")]
    pub replicates: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_stride")]
    pub stride: u64,
    /// Replicates whose final ‖Q - Q*‖ falls below this count as successes.
    pub tolerance: Option<f64>,
    /// κ in α = N^-κ (general algorithm only).
    #[serde(default = "unit")]
    pub alpha_exponent: f64,
    /// Start law of the general algorithm.
    #[serde(default)]
    pub start: StartChoice,
    #[serde(default)]
    pub backend: Backend,
}

fn unit() -> f64 {
    1.0
}

fn one() -> u64 {
    1
}

fn default_stride() -> u64 {
    DEFAULT_STRIDE
}

struct Loaded {
    config: ExperimentConfig,
    mdp_path: PathBuf,
}

fn load(global: &GlobalArgs, command: &str) -> CliResult<Loaded> {
    let path = require_config(global, command)?;
    let mut config: ExperimentConfig = read_json(&path)?;
    if let Some(seed) = global.seed {
        config.master_seed = seed;
    }
    if config.replicates == 0 {
        return Err(CliError::Usage("replicates must be at least 1".into()));
    }
    if config.episodes == 0 {
        return Err(CliError::Usage("episodes must be at least 1".into()));
    }
    let mdp_path = relative_to(&path, &config.mdp);
    Ok(Loaded { config, mdp_path })
}

fn load_model<S: Scalar>(path: &Path, gamma: &Option<NumberText>) -> CliResult<Mdp<S>> {
    let m: Mdp<S> = load_mdp(path)?;
    Ok(match gamma {
        Some(g) => m.with_gamma(g.parse()?)?,
        None => m,
    })
}

fn pool(jobs: u16) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs as usize)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn quantiles(values: &[f64]) -> Value {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    json!({
        "min": sorted[0],
        "q25": quantile(&sorted, 0.25),
        "median": quantile(&sorted, 0.5),
        "q75": quantile(&sorted, 0.75),
        "max": sorted[sorted.len() - 1],
    })
}

fn q_table<S: Scalar>(m: &Mdp<S>, r: u64, outcome: &RunOutcome<S>) -> Value {
    let pairs: Vec<Value> = m
        .pairs()
        .map(|(x, a)| {
            let v = outcome.q.get(x, a);
            let mut row = json!({
                "state": m.state_name(x),
                "action": m.action_name(x, a),
                "q": v.to_f64(),
                "visits": outcome.audit.pair_visits[x][a],
            });
            if S::EXACT {
                row["q_exact"] = json!(v.to_text());
            }
            row
        })
        .collect();
    let epsilon: Vec<Value> = (0..m.n_states())
        .map(|x| json!({ "state": m.state_name(x), "epsilon": outcome.epsilon[x].to_f64() }))
        .collect();
    json!({
        "format_version": FORMAT_VERSION,
        "replicate": r,
        "k": outcome.k,
        "pairs": pairs,
        "epsilon": epsilon,
    })
}

fn trace_artifact<S: Scalar>(
    global: &GlobalArgs,
    m: &Mdp<S>,
    r: u64,
    outcome: &RunOutcome<S>,
) -> CliResult<(String, Vec<u8>)> {
    Ok(match global.table_format() {
        Format::Csv => {
            let mut buf = Vec::new();
            outcome.trace.write_csv(m, &mut buf).map_err(|e| CliError::io("trace", e))?;
            (format!("trace_r{r}.csv"), buf)
        }
        Format::Json => {
            let pair_names: Vec<String> =
                m.pairs().map(|(x, a)| format!("{}|{}", m.state_name(x), m.action_name(x, a))).collect();
            let doc = json!({
                "format_version": FORMAT_VERSION,
                "replicate": r,
                "pairs": pair_names,
                "records": outcome.trace.records,
            });
            (format!("trace_r{r}.json"), io::pretty(&doc).into_bytes())
        }
    })
}

fn run_all<S: Scalar>(
    global: &GlobalArgs,
    loaded: &Loaded,
    algorithm: Algorithm,
    out: &OutDir,
) -> CliResult<Value> {
    let cfg = &loaded.config;
    let m: Mdp<S> = load_model(&loaded.mdp_path, &cfg.gamma_override)?;
    let outcomes: Vec<fvmc::Result<RunOutcome<S>>> = pool(global.jobs)?.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let rc = RunConfig {
                    episodes: cfg.episodes,
                    stride: cfg.stride,
                    theta: cfg.theta,
                    alpha_exponent: cfg.alpha_exponent,
                    start: cfg.start,
                    master_seed: cfg.master_seed,
                    replicate: r,
                };
                run(algorithm, &m, &rc)
            })
            .collect()
    });

    let mut q_errors = Vec::new();
    let mut v_errors = Vec::new();
    for (r, outcome) in (0..).zip(outcomes) {
        let outcome = outcome?;
        let last = outcome.trace.last().expect("the final episode is always recorded");
        q_errors.push(last.q_error);
        v_errors.push(last.v_error);
        let (name, bytes) = trace_artifact(global, &m, r, &outcome)?;
        out.write(&name, &bytes)?;
        out.write_json(&format!("q_r{r}.json"), &q_table(&m, r, &outcome))?;
        let audit = check_cqdev(&outcome.audit, &outcome.epsilon, outcome.k);
        out.write_json(
            &format!("audit_r{r}.json"),
            &json!({ "format_version": FORMAT_VERSION, "replicate": r, "audit": audit }),
        )?;
    }
    let successes = cfg.tolerance.map(|t| q_errors.iter().filter(|e| **e < t).count());
    Ok(json!({
        "format_version": FORMAT_VERSION,
        "algorithm": algorithm,
        "backend": cfg.backend,
        "mdp": cfg.mdp.display().to_string(),
        "gamma": m.gamma().to_f64(),
        "theta": cfg.theta,
        "alpha_exponent": cfg.alpha_exponent,
        "start": cfg.start,
        "episodes": cfg.episodes,
        "stride": cfg.stride,
        "replicates": cfg.replicates,
        "master_seed": cfg.master_seed,
        "tolerance": cfg.tolerance,
        "replicates_below_tolerance": successes,
        "final_q_errors": q_errors,
        "final_v_errors": v_errors,
        "q_error_quantiles": quantiles(&q_errors),
    }))
}

/// `run-fva` accepts the fva and fva_finite algorithms, `run-general` only
/// the general one.
pub fn run_experiment(global: &GlobalArgs, general: bool) -> CliResult<()> {
    let command = if general { "run-general" } else { "run-fva" };
    let out = OutDir::required(global, command)?;
    let loaded = load(global, command)?;
    let algorithm = match (general, loaded.config.algorithm) {
        (true, None | Some(Algorithm::General)) => Algorithm::General,
        (false, None) => Algorithm::Fva,
        (false, Some(a @ (Algorithm::Fva | Algorithm::FvaFinite))) => a,
        (_, Some(a)) => {
            return Err(CliError::Usage(format!("{command} cannot run algorithm {a:?}")));
        }
    };
    let summary = match loaded.config.backend {
        Backend::Float => run_all::<f64>(global, &loaded, algorithm, &out)?,
        Backend::Exact => run_all::<Rational>(global, &loaded, algorithm, &out)?,
    };
    out.write_json("summary.json", &summary)?;
    print_report(&summary);
    Ok(())
}

fn couple<S: Scalar>(global: &GlobalArgs, loaded: &Loaded) -> CliResult<Vec<CouplingReport>> {
    let cfg = &loaded.config;
    let m: Mdp<S> = load_model(&loaded.mdp_path, &cfg.gamma_override)?;
    let triangle = validated_triangle(&m)?
        .ok_or_else(|| CliError::Usage("couple-check needs an MDP with a triangle".into()))?;
    let mu0 = match StartDist::<S>::uniform_states(&m) {
        StartDist::States(mu) => mu,
        StartDist::Pairs(_) => unreachable!("uniform_states gives a state law"),
    };
    let extension = return_horizon(&m)?;
    let reports: Vec<fvmc::Result<CouplingReport>> = pool(global.jobs)?.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let seed = SeedSpec::new(cfg.master_seed, r, 0);
                couple_alg2_alg3(&m, &triangle, &mu0, cfg.theta, seed, cfg.episodes, extension)
            })
            .collect()
    });
    Ok(reports.into_iter().collect::<fvmc::Result<_>>()?)
}

pub fn couple_check(global: &GlobalArgs) -> CliResult<()> {
    io::only_json(global, "couple-check")?;
    let loaded = load(global, "couple-check")?;
    let reports = match loaded.config.backend {
        Backend::Float => couple::<f64>(global, &loaded)?,
        Backend::Exact => couple::<Rational>(global, &loaded)?,
    };
    let report = json!({
        "format_version": FORMAT_VERSION,
        "mdp": loaded.config.mdp.display().to_string(),
        "backend": loaded.config.backend,
        "episodes": loaded.config.episodes,
        "theta": loaded.config.theta,
        "agreed": reports.iter().all(CouplingReport::agreed),
        "replicates": reports,
    });
    io::emit_report(global, "couple_check.json", &report)
}

