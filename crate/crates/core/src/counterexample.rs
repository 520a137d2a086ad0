//! Exact reproduction of a divergent Monte-Carlo control run.
//!
//! One state `e`, two actions, `γ ∈ (1/2, 1)`, ε ≡ 0. The start pair and the
//! step sizes are chosen from the current zone so that
//! `(u, v) = (Q̂(e,0), Q̂(e,1))` cycles through four zones forever and the
//! greedy policy flips between always-0 and always-1. `u` stays rational and
//! `v` stays in `ℚ(√2) ∖ ℚ`, so the greedy action is never tied.

use serde::{Deserialize, Serialize};

use num::bigint::BigInt;
use num::{One, Zero};

use crate::error::{Error, Result};
use crate::instances::counterexample_mdp;
use crate::quadratic::ExtendedRational;
use crate::scalar::{Rational, Scalar};
use crate::solver::{policy_evaluation, Evaluation};
use crate::tables::StationaryPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Zone {
    Z1,
    Z2,
    Z3,
    Z4,
}

impl Zone {
    pub fn successor(self) -> Zone {
        match self {
            Zone::Z1 => Zone::Z2,
            Zone::Z2 => Zone::Z3,
            Zone::Z3 => Zone::Z4,
            Zone::Z4 => Zone::Z1,
        }
    }

    /// Greedy action in the zone: 1 in Z1 and Z4 (v > u), 0 otherwise.
    pub fn greedy_action(self) -> usize {
        match self {
            Zone::Z1 | Zone::Z4 => 1,
            Zone::Z2 | Zone::Z3 => 0,
        }
    }

    /// Action whose value gets updated (the start action).
    pub fn updated_action(self) -> usize {
        match self {
            Zone::Z1 | Zone::Z3 => 0,
            Zone::Z2 | Zone::Z4 => 1,
        }
    }
}

/// The four zone boundaries at a given γ.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundaries {
    /// 1/(2(1-γ))
    pub mid: Rational,
    /// (1+2γ)/(4(1-γ))
    pub high: Rational,
    /// (3-2γ)/(4(1-γ))
    pub low: Rational,
    /// γ/(1-γ)
    pub u_cap: Rational,
}

impl Boundaries {
    pub fn new(gamma: &Rational) -> Self {
        let one = Rational::one();
        let two = Rational::from_u64(2);
        let four = Rational::from_u64(4);
        let d = one.clone() - gamma;
        Self {
            mid: one.clone() / (two.clone() * &d),
            high: (one + two.clone() * gamma) / (four.clone() * &d),
            low: (Rational::from_u64(3) - two * gamma) / (four * &d),
            u_cap: gamma / d,
        }
    }
}

/// Exact zone membership, `None` when (u, v) lies in no zone.
pub fn zone_of(u: &ExtendedRational, v: &ExtendedRational, gamma: &Rational) -> Option<Zone> {
    let b = Boundaries::new(gamma);
    let one = Rational::one();
    let upper_band = *v > b.mid && *v < b.high;
    let lower_band = *v > b.low && *v < b.mid;
    let v_leads = v > u && *u > one;
    let u_leads = v < u && *u < b.u_cap;
    match (v_leads, u_leads, upper_band, lower_band) {
        (true, _, true, _) => Some(Zone::Z1),
        (_, true, true, _) => Some(Zone::Z2),
        (_, true, _, true) => Some(Zone::Z3),
        (true, _, _, true) => Some(Zone::Z4),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CxParams {
    pub gamma: Rational,
    pub q: Rational,
    pub u0: ExtendedRational,
    pub v0: ExtendedRational,
}

impl CxParams {
    pub fn new(gamma: Rational, q: Rational, u0: ExtendedRational, v0: ExtendedRational) -> Result<Self> {
        let half = Rational::from_ratio(1, 2);
        if !(gamma > half && gamma < Rational::one()) {
            return Err(Error::Argument(format!("gamma {} outside (1/2, 1)", gamma.to_text())));
        }
        let q_max = gamma.clone() / Rational::from_u64(2) - Rational::from_ratio(1, 4);
        if !(q > Rational::zero() && q < q_max) {
            return Err(Error::Argument(format!(
                "q {} outside (0, {})",
                q.to_text(),
                q_max.to_text()
            )));
        }
        if !u0.is_rational() {
            return Err(Error::Argument("u0 must be rational".into()));
        }
        if v0.is_rational() {
            return Err(Error::Argument("v0 must be irrational".into()));
        }
        if zone_of(&u0, &v0, &gamma) != Some(Zone::Z1) {
            return Err(Error::Argument("(u0, v0) must lie in Z1".into()));
        }
        Ok(Self { gamma, q, u0, v0 })
    }

    /// γ = 3/4, q = 1/10, u0 = 9/4, v0 = 9/4 + √2/100.
    pub fn standard() -> Self {
        let r = Rational::from_ratio;
        Self::new(
            r(3, 4),
            r(1, 10),
            ExtendedRational::rational(r(9, 4)),
            ExtendedRational::new(r(9, 4), r(1, 100)),
        )
        .expect("standard parameters are valid")
    }

    pub fn initial_state(&self) -> CxState {
        CxState {
            u: self.u0.clone(),
            v: self.v0.clone(),
            l0: 0,
            l1: 0,
            k: 0,
            zone: Zone::Z1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CxState {
    /// Q̂^k(e,0)
    pub u: ExtendedRational,
    /// Q̂^k(e,1)
    pub v: ExtendedRational,
    /// Number of earlier updates of action 0.
    pub l0: u64,
    /// Number of earlier updates of action 1.
    pub l1: u64,
    pub k: u64,
    pub zone: Zone,
}

impl CxState {
    /// Step size of the next update: q/(1+L) for the updated action.
    pub fn alpha(&self, params: &CxParams) -> Rational {
        let l = match self.zone.updated_action() {
            0 => self.l0,
            _ => self.l1,
        };
        params.q.clone() / Rational::from_u64(1 + l)
    }
}

/// One step of the automaton. Errors if the state is outside all zones or
/// the next state is neither in the current zone nor its successor.
pub fn cx_step(state: CxState, params: &CxParams) -> Result<CxState> {
    let gamma = &params.gamma;
    if zone_of(&state.u, &state.v, gamma) != Some(state.zone) {
        return Err(Error::Contract(format!("step {}: state outside its zone", state.k)));
    }
    let alpha = state.alpha(params);
    let one = Rational::one();
    let d = one.clone() - gamma;
    let CxState { mut u, mut v, mut l0, mut l1, k, zone } = state;
    match zone {
        Zone::Z1 => {
            u = u.lerp(&alpha, &(gamma.clone() / d));
            l0 += 1;
        }
        Zone::Z2 => {
            v = v.lerp(&alpha, &one);
            l1 += 1;
        }
        Zone::Z3 => {
            u = u.lerp(&alpha, &Rational::zero());
            l0 += 1;
        }
        Zone::Z4 => {
            v = v.lerp(&alpha, &(one / d));
            l1 += 1;
        }
    }
    let next = zone_of(&u, &v, gamma)
        .filter(|z| *z == zone || *z == zone.successor())
        .ok_or_else(|| Error::Contract(format!("step {k}: left {zone:?} to a non-successor")))?;
    Ok(CxState { u, v, l0, l1, k: k + 1, zone: next })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CxRecord {
    pub k: u64,
    pub zone: Zone,
    pub u: f64,
    pub v: f64,
    pub l0: u64,
    pub l1: u64,
    /// V_{π̂^k}(e), exact, as text.
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneTransition {
    /// First k with the new zone.
    pub k: u64,
    pub from: Zone,
    pub to: Zone,
}

/// Step-size audit for one action.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionAudit {
    pub updates: u64,
    /// Σ α over updates of this action.
    pub alpha_sum: Rational,
    pub alpha_sq_sum: Rational,
    /// alpha_sum == q·H(updates) and alpha_sq_sum == q²·Σ_{j≤updates} 1/j².
    pub matches_harmonic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CxTrace {
    /// States k = 0..=steps.
    pub records: Vec<CxRecord>,
    pub transitions: Vec<ZoneTransition>,
    /// Completed Z1 → Z2 → Z3 → Z4 → Z1 cycles.
    pub cycles: u64,
    pub audit: [ActionAudit; 2],
    pub final_state: CxState,
    /// Largest denominator bit length seen in u or v.
    pub max_denominator_bits: u64,
    /// V_{π_0}(e) and V_{π_1}(e).
    pub policy_values: [Rational; 2],
}

impl CxTrace {
    /// Each record carries the value of its zone's greedy policy, and the
    /// two policy values differ.
    pub fn values_alternate(&self) -> bool {
        self.records.iter().all(|r| {
            let expect = &self.policy_values[r.zone.greedy_action()];
            r.value == expect.to_text()
        }) && self.policy_values[0] != self.policy_values[1]
    }

    /// The recorded zones visit Z1, Z2, Z3, Z4, Z1, ... in order.
    pub fn cyclic_order(&self) -> bool {
        let mut zone = Zone::Z1;
        for t in &self.transitions {
            if t.from != zone || t.to != zone.successor() {
                return false;
            }
            zone = t.to;
        }
        true
    }

    pub fn write_csv(&self, mut out: impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "k,zone,u,v,l0,l1,value")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:?},{:?},{:?},{},{},{}",
                r.k, r.zone, r.u, r.v, r.l0, r.l1, r.value
            )?;
        }
        Ok(())
    }
}

/// Σ_{j=lo}^{hi-1} 1/j^power by binary splitting, unreduced.
fn harmonic_range(lo: u64, hi: u64, power: u32) -> (BigInt, BigInt) {
    match hi - lo {
        0 => (BigInt::zero(), BigInt::one()),
        1 => (BigInt::one(), BigInt::from(lo).pow(power)),
        len => {
            let mid = lo + len / 2;
            let (n1, d1) = harmonic_range(lo, mid, power);
            let (n2, d2) = harmonic_range(mid, hi, power);
            (n1 * &d2 + n2 * &d1, d1 * d2)
        }
    }
}

/// Σ_{j=1}^{n} 1/j^power.
fn harmonic(n: u64, power: u32) -> Rational {
    let (num, den) = harmonic_range(1, n + 1, power);
    Rational::new(num, den)
}

/// `s + x` without gcd reduction.
fn add_unreduced(s: &Rational, x: &Rational) -> Rational {
    Rational::new_raw(s.numer() * x.denom() + x.numer() * s.denom(), s.denom() * x.denom())
}

fn denominator_bits(x: &ExtendedRational) -> u64 {
    x.a.denom().bits().max(x.b.denom().bits())
}

/// Iterates [`cx_step`] `max_steps` times and checks, at every step:
/// u ∈ ℚ, v ∉ ℚ, the moved coordinate drifts monotonically toward its
/// target, and zones only advance to their successor.
pub fn run_counterexample(params: &CxParams, max_steps: u64) -> Result<CxTrace> {
    let mdp = counterexample_mdp(params.gamma.clone());
    let policy_values = [0usize, 1].map(|a| {
        let pi = StationaryPolicy::deterministic(&[a], &mdp).expect("one state");
        policy_evaluation(&mdp, &pi, Evaluation::LinearSolve).expect("nonsingular").values[0].clone()
    });
    let record = |s: &CxState| CxRecord {
        k: s.k,
        zone: s.zone,
        u: s.u.to_f64(),
        v: s.v.to_f64(),
        l0: s.l0,
        l1: s.l1,
        value: policy_values[s.zone.greedy_action()].to_text(),
    };

    let mut state = params.initial_state();
    let mut records = vec![record(&state)];
    let mut transitions = Vec::new();
    let mut sums = [(Rational::zero(), Rational::zero()), (Rational::zero(), Rational::zero())];
    let mut max_bits = denominator_bits(&state.u).max(denominator_bits(&state.v));
    let mut cycles = 0;

    for _ in 0..max_steps {
        let action = state.zone.updated_action();
        let alpha = state.alpha(params);
        let before = state.clone();
        state = cx_step(state, params)?;
        let (s, s2) = &mut sums[action];
        *s = add_unreduced(s, &alpha);
        *s2 = add_unreduced(s2, &(alpha.clone() * alpha));

        if !state.u.is_rational() || state.v.is_rational() {
            return Err(Error::Contract(format!("step {}: rationality invariant broken", before.k)));
        }
        let drift_ok = match before.zone {
            Zone::Z1 => state.u > before.u,
            Zone::Z2 => state.v < before.v,
            Zone::Z3 => state.u < before.u,
            Zone::Z4 => state.v > before.v,
        };
        if !drift_ok {
            return Err(Error::Contract(format!("step {}: drift in the wrong direction", before.k)));
        }
        if state.zone != before.zone {
            transitions.push(ZoneTransition { k: state.k, from: before.zone, to: state.zone });
            if state.zone == Zone::Z1 {
                cycles += 1;
            }
        }
        max_bits = max_bits.max(denominator_bits(&state.u)).max(denominator_bits(&state.v));
        records.push(record(&state));
    }

    let q2 = params.q.clone() * params.q.clone();
    let audit = [(state.l0, &sums[0]), (state.l1, &sums[1])].map(|(n, (s, s2))| {
        let s = Rational::new(s.numer().clone(), s.denom().clone());
        let s2 = Rational::new(s2.numer().clone(), s2.denom().clone());
        ActionAudit {
            updates: n,
            matches_harmonic: s == params.q.clone() * harmonic(n, 1) && s2 == q2.clone() * harmonic(n, 2),
            alpha_sum: s,
            alpha_sq_sum: s2,
        }
    });
    if max_steps > 0 && transitions.is_empty() {
        return Err(Error::Contract(format!(
            "zone {:?} never left within {max_steps} steps",
            state.zone
        )));
    }
    Ok(CxTrace {
        records,
        transitions,
        cycles,
        audit,
        final_state: state,
        max_denominator_bits: max_bits,
        policy_values,
    })
}
