//! Acceptance suite: one PASS/FAIL line per criterion, each run at its
//! stated tolerance and timed against its runtime budget.

use std::time::{Duration, Instant};

use fvmc::control::{couple_alg2_alg3, return_horizon, run, validated_triangle, Algorithm, RunConfig};
use fvmc::counterexample::{run_counterexample, CxParams, Zone};
use fvmc::instances::counterexample_mdp;
use fvmc::random::RandomMdpSpec;
use fvmc::solver::{brute_force_optimal, value_iteration};
use fvmc::stochastic::{
    abstract_sa_exact, contraction_sweep, robbins_monro, AbstractSaConfig, FiniteNoise, RmConfig, StepRule,
    SyntheticContraction,
};
use fvmc::{Mdp, Rational, Scalar, SeedSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(id: u32, name: &str, budget: Duration, body: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let pass = outcome.pass && in_time;
    println!(
        "{} criterion {id} ({name}): {} [{:.2?} of {:.0?}]",
        if pass { "PASS" } else { "FAIL" },
        outcome.detail,
        elapsed,
        budget
    );
    pass
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn solver_ground_truth() -> Outcome {
    let m = counterexample_mdp(0.75);
    let (v, q) = value_iteration(&m, fvmc::control::SOLVE_TOL).expect("solve");
    let errs = [(v.values[0] - 4.0).abs(), (q.rows[0][0] - 3.0).abs(), (q.rows[0][1] - 4.0).abs()];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    Outcome {
        pass: worst <= 1e-10,
        detail: format!("V*(e)={:.12}, Q*(e,0)={:.12}, Q*(e,1)={:.12}", v.values[0], q.rows[0][0], q.rows[0][1]),
    }
}

fn oracle_equivalence() -> Outcome {
    let gammas = [0.1, 0.4, 0.75, 0.9, 0.99];
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let spec = RandomMdpSpec {
            n_states: 1 + (seed % 3) as usize,
            max_actions: 3,
            gamma: gammas[(seed % 5) as usize],
            branching: 2,
            reward_range: (-1, 1),
            reward_points: 2,
            seed,
            ..Default::default()
        };
        let m: Mdp<f64> = spec.generate().expect("generate");
        let (v_vi, _) = value_iteration(&m, 1e-12).expect("vi");
        let (v_bf, _) = brute_force_optimal(&m).expect("bf");
        worst = worst.max(v_vi.sup_distance(&v_bf));
    }
    Outcome { pass: worst <= 1e-9, detail: format!("max ‖V_vi - V_bf‖ = {worst:.3e} over 100 MDPs") }
}

fn contraction() -> Outcome {
    let report = contraction_sweep(2024, 200, &[0.1, 0.25, 0.4]).expect("sweep");
    let pass = report.cases.len() == 600
        && report.max_norm_violation <= 1e-10
        && report.max_dominance_violation <= 1e-10;
    Outcome {
        pass,
        detail: format!(
            "{} tuples, max norm violation {:.3e}, max dominance violation {:.3e}",
            report.cases.len(),
            report.max_norm_violation,
            report.max_dominance_violation
        ),
    }
}

/// Absorbing instance for the convergence check: 3 transient states and △,
/// deterministic transitions and rewards, forward-only moves. Seed 0 of this
/// family exits to △ from every pair (a one-step bandit); seed 1 is the
/// first whose values depend on later decisions.
fn absorbing_instance() -> Mdp<f64> {
    RandomMdpSpec {
        n_states: 4,
        max_actions: 2,
        min_actions: 2,
        gamma: 0.4,
        branching: 1,
        reward_range: (0, 1),
        reward_points: 1,
        absorbing_fraction: 0.25,
        acyclic: true,
        seed: 1,
    }
    .generate()
    .expect("generate")
}

fn fva_convergence() -> Outcome {
    let k = 50_000;
    let cases = [
        ("one-state", counterexample_mdp(0.4), Algorithm::Fva),
        ("absorbing", absorbing_instance(), Algorithm::FvaFinite),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, m, alg) in cases {
        let mut final_err = Vec::new();
        let mut early_err = Vec::new();
        for seed in 0..10 {
            let cfg = RunConfig { episodes: k, stride: k / 10, theta: 1.0, master_seed: seed, ..Default::default() };
            let out = run(alg, &m, &cfg).expect("run");
            final_err.push(out.trace.last().expect("records").q_error);
            early_err.push(out.trace.records[0].q_error);
        }
        let good = final_err.iter().filter(|e| **e < 0.05).count();
        let (m_final, m_early) = (median(final_err), median(early_err));
        pass &= good >= 9 && m_final < m_early;
        parts.push(format!("{name}: {good}/10 below 0.05, median {m_final:.2e} at K vs {m_early:.2e} at K/10"));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn coupling() -> Outcome {
    let spec = RandomMdpSpec {
        n_states: 5,
        max_actions: 3,
        gamma: 0.5,
        branching: 3,
        reward_range: (-1, 2),
        reward_points: 2,
        absorbing_fraction: 0.4,
        seed: 7,
        ..Default::default()
    };
    let m: Mdp<f64> = spec.generate().expect("generate");
    let triangle = validated_triangle(&m).expect("valid").expect("declared");
    let extension = return_horizon(&m).expect("horizon");
    let mu0 = vec![1.0 / 5.0; 5];
    let mut agreed = 0;
    let mut first_bad = None;
    for seed in 0..5 {
        let r = couple_alg2_alg3(&m, &triangle, &mu0, 1.0, SeedSpec::new(seed, 0, 0), 200, extension)
            .expect("couple");
        if r.agreed() {
            agreed += 1;
        } else if first_bad.is_none() {
            first_bad = r.divergence.clone();
        }
    }
    Outcome {
        pass: agreed == 5,
        detail: format!("{agreed}/5 seeds bit-identical through k=200, first divergence {first_bad:?}"),
    }
}

fn counterexample() -> Outcome {
    let trace = run_counterexample(&CxParams::standard(), 5000);
    let trace = match trace {
        Ok(t) => t,
        Err(e) => return Outcome { pass: false, detail: format!("invariant failure: {e}") },
    };
    let four = Rational::from_u64(4).to_text();
    let zero = Rational::from_u64(0).to_text();
    let values_ok = trace.records.iter().all(|r| match r.zone {
        Zone::Z1 | Zone::Z4 => r.value == four,
        Zone::Z2 | Zone::Z3 => r.value == zero,
    });
    let both_seen = trace.records.iter().any(|r| r.value == four) && trace.records.iter().any(|r| r.value == zero);
    let audit_ok = trace.audit.iter().all(|a| a.matches_harmonic);
    let pass = trace.cycles >= 5 && trace.cyclic_order() && values_ok && both_seen && audit_ok;
    Outcome {
        pass,
        detail: format!(
            "{} cycles, {} zone changes, V in {{4, 0}} by zone: {values_ok}, audit exact: {audit_ok}, \
             denominators up to {} bits",
            trace.cycles,
            trace.transitions.len(),
            trace.max_denominator_bits
        ),
    }
}

fn robbins_monro_checks() -> Outcome {
    let mut small = 0;
    for seed in 0..10 {
        let cfg = RmConfig {
            theta: StepRule::Harmonic { offset: 2 },
            noise: FiniteNoise::symmetric(1.0),
            z0: 5.0,
            steps: 100_000,
            seed,
        };
        let z = robbins_monro(&cfg).expect("rm");
        if z.last().expect("non-empty").abs() < 0.05 {
            small += 1;
        }
    }
    let negative = RmConfig {
        theta: StepRule::Geometric,
        noise: FiniteNoise::zero(),
        z0: 1.0,
        steps: 1000,
        seed: 0,
    };
    let limit = *robbins_monro(&negative).expect("rm").last().expect("non-empty");
    Outcome {
        pass: small >= 9 && limit > 0.2,
        detail: format!("positive control {small}/10 with |Z| < 0.05; summable steps stall at {limit:.6}"),
    }
}

fn domination() -> Outcome {
    let r = Rational::from_ratio;
    let m: Mdp<Rational> = RandomMdpSpec { n_states: 3, max_actions: 3, gamma: 0.25, seed: 3, ..Default::default() }
        .generate()
        .expect("generate");
    let f_star = vec![r(1, 1), r(0, 1), r(-1, 3), r(5, 2)];
    let maps = [
        ("constant", SyntheticContraction::constant_target(f_star.clone()), Some(StepRule::Harmonic { offset: 1 })),
        (
            "shrink",
            SyntheticContraction::sup_norm_shrink(f_star, r(1, 2)).expect("rho"),
            Some(StepRule::Harmonic { offset: 1 }),
        ),
        ("policy operator", SyntheticContraction::policy_operator(m).expect("γ < 1/2"), None),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, synth, eta) in maps {
        let f0: Vec<Rational> = (0..synth.len()).map(|i| r(3 - 2 * i as i64, 2)).collect();
        let cfg = AbstractSaConfig {
            lambda: StepRule::Harmonic { offset: 1 },
            eta,
            noise: FiniteNoise::symmetric(0.125),
            steps: 10_000,
            seed: 11,
        };
        let run = abstract_sa_exact(&synth, &cfg, &f0).expect("sa");
        let ok = run.domination_failure.is_none() && run.map_above_target.is_none();
        pass &= ok;
        parts.push(format!("{name}: {}", if ok { "dominated" } else { "violated" }));
    }
    Outcome { pass, detail: format!("{} over 10^4 exact steps", parts.join(", ")) }
}

// Runs without the libtest harness so the verdict lines are never captured.
fn main() {
    let results = [
        check(1, "exact solver ground truth", Duration::from_secs(1), solver_ground_truth),
        check(2, "value iteration vs enumeration", Duration::from_secs(10), oracle_equivalence),
        check(3, "contraction sweep", Duration::from_secs(30), contraction),
        check(4, "first-visit convergence", Duration::from_secs(300), fva_convergence),
        check(5, "infinite/finite episode coupling", Duration::from_secs(60), coupling),
        check(6, "divergent control run", Duration::from_secs(60), counterexample),
        check(7, "Robbins-Monro controls", Duration::from_secs(30), robbins_monro_checks),
        check(8, "domination by the auxiliary recursion", Duration::from_secs(10), domination),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
