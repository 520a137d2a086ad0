//! `check-contraction`, `check-robbins-monro` and `check-abstract-sa`.

use std::path::PathBuf;

use fvmc::mdp::NumberText;
use fvmc::random::RandomMdpSpec;
use fvmc::stochastic::{
    abstract_sa_exact, contraction_sweep, robbins_monro, AbstractSaConfig, FiniteNoise, RmConfig, StepRule,
    SyntheticContraction,
};
use fvmc::{Mdp, Rational, Scalar};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::{Format, GlobalArgs};
use crate::error::{CliError, CliResult};
use crate::io::{self, config_or_default, csv_bytes, load_mdp, relative_to, OutDir, FORMAT_VERSION};

fn pool(jobs: u16) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs as usize)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))
}

/// Writes one trajectory per seed when `--out-dir` is given.
fn write_trajectory(
    global: &GlobalArgs,
    stem: &str,
    columns: &[String],
    rows: &[(u64, Vec<f64>)],
) -> CliResult<()> {
    let Some(dir) = &global.out_dir else { return Ok(()) };
    let out = OutDir::create(dir)?;
    match global.table_format() {
        Format::Csv => {
            let mut header = vec!["k"];
            header.extend(columns.iter().map(String::as_str));
            let body = rows.iter().map(|(k, v)| {
                let mut row = vec![k.to_string()];
                row.extend(v.iter().map(|x| io::num(*x)));
                row
            });
            out.write(&format!("{stem}.csv"), &csv_bytes(&header, body)?)?;
        }
        Format::Json => {
            let records: Vec<Value> = rows.iter().map(|(k, v)| json!({ "k": k, "values": v })).collect();
            let doc = json!({ "format_version": FORMAT_VERSION, "columns": columns, "records": records });
            out.write_json(&format!("{stem}.json"), &doc)?;
        }
    }
    Ok(())
}

/// Every `stride`-th entry plus the last one.
fn thinned<T: Clone>(values: &[T], stride: u64) -> Vec<(u64, T)> {
    let stride = stride.max(1) as usize;
    let last = values.len().saturating_sub(1);
    (0..values.len())
        .filter(|&k| k % stride == 0 || k == last)
        .map(|k| (k as u64, values[k].clone()))
        .collect()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ContractionConfig {
    seed: u64,
    count: usize,
    gammas: Vec<f64>,
    /// Violations at or below this are reported as zero.
    tolerance: f64,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        Self { seed: 0, count: 200, gammas: vec![0.1, 0.25, 0.4], tolerance: 1e-10 }
    }
}

pub fn check_contraction(global: &GlobalArgs, count: Option<usize>) -> CliResult<()> {
    let mut cfg: ContractionConfig = config_or_default(global)?;
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(n) = count {
        cfg.count = n;
    }
    let report = contraction_sweep(cfg.seed, cfg.count, &cfg.gammas)?;
    let per_gamma: Vec<Value> = cfg
        .gammas
        .iter()
        .map(|&g| {
            let cases: Vec<_> = report.cases.iter().filter(|c| c.gamma == g).collect();
            let max = |f: fn(&&fvmc::stochastic::SweepCase) -> f64| cases.iter().map(f).fold(0.0, f64::max);
            json!({
                "gamma": g,
                "cases": cases.len(),
                "max_norm_violation": max(|c| c.norm_violation),
                "max_dominance_violation": max(|c| c.dominance_violation),
                "max_lhs": max(|c| c.lhs),
            })
        })
        .collect();
    let violations = report
        .cases
        .iter()
        .filter(|c| c.norm_violation > cfg.tolerance || c.dominance_violation > cfg.tolerance)
        .count();
    if let Some(dir) = &global.out_dir {
        let out = OutDir::create(dir)?;
        match global.table_format() {
            Format::Csv => {
                let header = ["index", "gamma", "mdp_seed", "lhs", "rhs", "norm_violation", "dominance_violation"];
                let rows = report.cases.iter().map(|c| {
                    vec![
                        c.index.to_string(),
                        io::num(c.gamma),
                        c.mdp_seed.to_string(),
                        io::num(c.lhs),
                        io::num(c.rhs),
                        io::num(c.norm_violation),
                        io::num(c.dominance_violation),
                    ]
                });
                out.write("contraction_cases.csv", &csv_bytes(&header, rows)?)?;
            }
            Format::Json => {
                let doc = json!({ "format_version": FORMAT_VERSION, "cases": report.cases });
                out.write_json("contraction_cases.json", &doc)?;
            }
        }
    }
    let doc = json!({
        "format_version": FORMAT_VERSION,
        "seed": cfg.seed,
        "count": cfg.count,
        "gammas": cfg.gammas,
        "tolerance": cfg.tolerance,
        "cases": report.cases.len(),
        "violations": violations,
        "max_norm_violation": report.max_norm_violation,
        "max_dominance_violation": report.max_dominance_violation,
        "per_gamma": per_gamma,
    });
    io::emit_report(global, "contraction.json", &doc)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RmCheckConfig {
    theta: StepRule,
    noise: FiniteNoise,
    z0: f64,
    steps: u64,
    /// Seeds `seed`, `seed + 1`, ...
    seed: u64,
    seeds: u64,
    threshold: f64,
    stride: u64,
}

impl Default for RmCheckConfig {
    fn default() -> Self {
        Self {
            theta: StepRule::Harmonic { offset: 2 },
            noise: FiniteNoise::symmetric(1.0),
            z0: 5.0,
            steps: 100_000,
            seed: 0,
            seeds: 10,
            threshold: 0.05,
            stride: 1000,
        }
    }
}

pub fn check_robbins_monro(global: &GlobalArgs) -> CliResult<()> {
    let mut cfg: RmCheckConfig = config_or_default(global)?;
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    let runs: Vec<fvmc::Result<Vec<f64>>> = pool(global.jobs)?.install(|| {
        (0..cfg.seeds)
            .into_par_iter()
            .map(|i| {
                robbins_monro(&RmConfig {
                    theta: cfg.theta,
                    noise: cfg.noise.clone(),
                    z0: cfg.z0,
                    steps: cfg.steps,
                    seed: cfg.seed + i,
                })
            })
            .collect()
    });
    let mut per_seed = Vec::new();
    let mut below = 0;
    let mut max_abs: f64 = 0.0;
    for (i, run) in (0..).zip(runs) {
        let z = run?;
        let last = *z.last().expect("trajectory includes Z_0");
        let ok = last.abs() < cfg.threshold;
        below += ok as usize;
        max_abs = max_abs.max(last.abs());
        per_seed.push(json!({ "seed": cfg.seed + i, "final": last, "below_threshold": ok }));
        let rows: Vec<(u64, Vec<f64>)> = thinned(&z, cfg.stride).into_iter().map(|(k, v)| (k, vec![v])).collect();
        write_trajectory(global, &format!("robbins_monro_s{}", cfg.seed + i), &["z".to_string()], &rows)?;
    }
    let doc = json!({
        "format_version": FORMAT_VERSION,
        "theta": cfg.theta,
        "theta_satisfies_conditions": cfg.theta.satisfies_conditions(),
        "noise": cfg.noise,
        "z0": cfg.z0,
        "steps": cfg.steps,
        "threshold": cfg.threshold,
        "below_threshold": below,
        "max_abs_final": max_abs,
        "seeds": per_seed,
    });
    io::emit_report(global, "robbins_monro.json", &doc)
}

/// Where the policy-operator map gets its MDP.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum MdpSource {
    Path(PathBuf),
    Random(RandomMdpSpec),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum MapConfig {
    ConstantTarget { f_star: Vec<NumberText> },
    SupNormShrink { f_star: Vec<NumberText>, rho: NumberText },
    PolicyOperator {
        #[serde(default, skip_serializing)]
        mdp: Option<MdpSource>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SaCheckConfig {
    map: MapConfig,
    lambda: StepRule,
    /// Absent means η ≡ 0.
    eta: Option<StepRule>,
    noise: FiniteNoise,
    /// Starting point; defaults to 3/2, 1/2, -1/2, ...
    f0: Option<Vec<NumberText>>,
    steps: u64,
    seed: u64,
    seeds: u64,
    stride: u64,
}

impl Default for SaCheckConfig {
    fn default() -> Self {
        Self {
            map: MapConfig::PolicyOperator { mdp: None },
            lambda: StepRule::Harmonic { offset: 1 },
            eta: None,
            noise: FiniteNoise::symmetric(0.125),
            f0: None,
            steps: 10_000,
            seed: 0,
            seeds: 1,
            stride: 100,
        }
    }
}

/// Default MDP for the policy-operator map: small, and with γ < 1/2 so the
/// operator contracts.
fn default_operator_mdp() -> RandomMdpSpec {
    RandomMdpSpec { n_states: 3, max_actions: 3, gamma: 0.25, seed: 3, ..Default::default() }
}

fn parse_all(values: &[NumberText]) -> CliResult<Vec<Rational>> {
    values.iter().map(|v| Ok(v.parse()?)).collect()
}

fn build_map(global: &GlobalArgs, map: &MapConfig) -> CliResult<SyntheticContraction<Rational>> {
    Ok(match map {
        MapConfig::ConstantTarget { f_star } => SyntheticContraction::constant_target(parse_all(f_star)?),
        MapConfig::SupNormShrink { f_star, rho } => {
            SyntheticContraction::sup_norm_shrink(parse_all(f_star)?, rho.parse()?)?
        }
        MapConfig::PolicyOperator { mdp } => {
            let m: Mdp<Rational> = match mdp {
                None => default_operator_mdp().generate()?,
                Some(MdpSource::Random(spec)) => spec.generate()?,
                Some(MdpSource::Path(p)) => {
                    let base = global.config.as_deref().unwrap_or(std::path::Path::new("."));
                    load_mdp(&relative_to(base, p))?
                }
            };
            SyntheticContraction::policy_operator(m)?
        }
    })
}

pub fn check_abstract_sa(global: &GlobalArgs) -> CliResult<()> {
    let mut cfg: SaCheckConfig = config_or_default(global)?;
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if cfg.seeds == 0 {
        return Err(CliError::Usage("seeds must be at least 1".into()));
    }
    let synth = build_map(global, &cfg.map)?;
    let f0 = match &cfg.f0 {
        Some(v) => parse_all(v)?,
        None => (0..synth.len()).map(|i| Rational::from_ratio(3 - 2 * i as i64, 2)).collect(),
    };
    let runs: Vec<fvmc::Result<_>> = pool(global.jobs)?.install(|| {
        (0..cfg.seeds)
            .into_par_iter()
            .map(|i| {
                let sa = AbstractSaConfig {
                    lambda: cfg.lambda,
                    eta: cfg.eta,
                    noise: cfg.noise.clone(),
                    steps: cfg.steps,
                    seed: cfg.seed + i,
                };
                abstract_sa_exact(&synth, &sa, &f0)
            })
            .collect()
    });
    let f_star: Vec<f64> = synth.f_star.iter().map(Scalar::to_f64).collect();
    let columns: Vec<String> = (0..synth.len()).map(|y| format!("f[{y}]")).collect();
    let mut per_seed = Vec::new();
    let mut dominated = true;
    let mut flags = Vec::new();
    for (i, run) in (0..).zip(runs) {
        let run = run?;
        flags = run.flags.clone();
        let last = run.trajectory.last().expect("trajectory includes f_0");
        let final_error = last.iter().zip(&f_star).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        dominated &= run.domination_failure.is_none();
        let at = |p: Option<(u64, usize)>| p.map(|(k, y)| json!({ "k": k, "component": y }));
        per_seed.push(json!({
            "seed": cfg.seed + i,
            "domination_failure": at(run.domination_failure),
            "map_above_target": at(run.map_above_target),
            "final_error": final_error,
            "scale_bits": run.scale_bits,
        }));
        write_trajectory(global, &format!("abstract_sa_s{}", cfg.seed + i), &columns, &thinned(&run.trajectory, cfg.stride))?;
    }
    let doc = json!({
        "format_version": FORMAT_VERSION,
        "map": cfg.map,
        "f_star": synth.f_star.iter().map(Scalar::to_text).collect::<Vec<_>>(),
        "lambda": cfg.lambda,
        "eta": cfg.eta,
        "noise": cfg.noise,
        "steps": cfg.steps,
        "hypothesis_flags": flags,
        "dominated": dominated,
        "seeds": per_seed,
    });
    io::emit_report(global, "abstract_sa.json", &doc)
}
