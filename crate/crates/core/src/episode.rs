//! Seeded episode simulation, returns, first-visit times, and the absorbing
//! set machinery.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{sums_to_one, Mdp};
use crate::rng::SeedSpec;
use crate::scalar::Scalar;
use crate::tables::StationaryPolicy;

/// Hard cap on absorbed-mode episode length.
pub const ABSORBED_STEP_CAP: usize = 10_000_000;

/// Distribution of the first state (then A_0 ~ π) or of the first pair.
#[derive(Debug, Clone, PartialEq)]
pub enum StartDist<S> {
    States(Vec<S>),
    Pairs(Vec<Vec<S>>),
}

impl<S: Scalar> StartDist<S> {
    pub fn uniform_states<T: Scalar>(m: &Mdp<T>) -> Self {
        let n = m.n_states();
        StartDist::States(vec![S::one() / S::from_u64(n as u64); n])
    }

    pub fn uniform_pairs<T: Scalar>(m: &Mdp<T>) -> Self {
        let z = S::from_u64(m.n_pairs() as u64);
        StartDist::Pairs(
            (0..m.n_states())
                .map(|x| vec![S::one() / z.clone(); m.n_actions(x)])
                .collect(),
        )
    }

    pub fn check<T: Scalar>(&self, m: &Mdp<T>) -> Result<()> {
        let (ok_shape, weights): (bool, Vec<&S>) = match self {
            StartDist::States(mu) => (mu.len() == m.n_states(), mu.iter().collect()),
            StartDist::Pairs(nu) => (
                nu.len() == m.n_states()
                    && nu.iter().enumerate().all(|(x, r)| r.len() == m.n_actions(x)),
                nu.iter().flatten().collect(),
            ),
        };
        if !ok_shape {
            return Err(Error::Argument("start distribution does not match the MDP".into()));
        }
        if weights.iter().any(|w| **w < S::zero()) {
            return Err(Error::Argument("start distribution has a negative weight".into()));
        }
        let total = weights.into_iter().fold(S::zero(), |a, w| a + w.clone());
        if !sums_to_one(&total) {
            return Err(Error::Argument(format!(
                "start distribution sums to {}",
                total.to_text()
            )));
        }
        Ok(())
    }
}

/// △ as a set of state indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbsorbingSpec {
    pub triangle: Vec<usize>,
}

/// An [`AbsorbingSpec`] that passed [`check_absorbing`] for a given MDP.
/// Only obtainable through [`AbsorbingSpec::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedAbsorbing {
    member: Vec<bool>,
}

impl ValidatedAbsorbing {
    pub fn contains(&self, x: usize) -> bool {
        self.member.get(x).copied().unwrap_or(false)
    }

    pub fn n_states(&self) -> usize {
        self.member.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "clause", rename_all = "snake_case")]
pub enum AbsorbingViolation {
    /// State index outside the MDP.
    UnknownState { state: usize },
    /// Clause (a): a reward from a △ state is not the point mass at 0.
    NonzeroReward { state: usize, action: usize, next: usize },
    /// Clause (b): P(x,a,△) < 1 for some x in △.
    NotClosed { state: usize, action: usize },
    /// Clause (c): no path to △ under the max-probability matrix.
    Unreachable { state: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbsorbingReport {
    pub violations: Vec<AbsorbingViolation>,
}

impl AbsorbingReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

impl AbsorbingSpec {
    pub fn new(triangle: Vec<usize>) -> Self {
        Self { triangle }
    }

    /// The spec declared in the MDP document, if any.
    pub fn from_mdp<S: Scalar>(m: &Mdp<S>) -> Option<Self> {
        m.triangle().map(|t| Self::new(t.to_vec()))
    }

    pub fn validate<S: Scalar>(
        &self,
        m: &Mdp<S>,
    ) -> std::result::Result<ValidatedAbsorbing, AbsorbingReport> {
        let report = check_absorbing(m, self);
        if report.passes() {
            let mut member = vec![false; m.n_states()];
            for &x in &self.triangle {
                member[x] = true;
            }
            Ok(ValidatedAbsorbing { member })
        } else {
            Err(report)
        }
    }
}

/// Checks the three clauses of the absorbing-set assumption and lists every
/// violation with its witness.
pub fn check_absorbing<S: Scalar>(m: &Mdp<S>, spec: &AbsorbingSpec) -> AbsorbingReport {
    let n = m.n_states();
    let mut violations = Vec::new();
    let mut member = vec![false; n];
    for &x in &spec.triangle {
        if x >= n {
            violations.push(AbsorbingViolation::UnknownState { state: x });
        } else {
            member[x] = true;
        }
    }
    for x in (0..n).filter(|&x| member[x]) {
        for a in 0..m.n_actions(x) {
            for y in 0..n {
                if !m.reward(x, a, y).is_zero() {
                    violations.push(AbsorbingViolation::NonzeroReward { state: x, action: a, next: y });
                }
            }
            let inside = m
                .transition(x, a)
                .iter()
                .enumerate()
                .filter(|(y, _)| member[*y])
                .fold(S::zero(), |acc, (_, p)| acc + p.clone());
            if !sums_to_one(&inside) {
                violations.push(AbsorbingViolation::NotClosed { state: x, action: a });
            }
        }
    }
    // Backward search from △ over the support of the max-probability matrix.
    let mut predecessors = vec![Vec::new(); n];
    for x in 0..n {
        for y in 0..n {
            if (0..m.n_actions(x)).any(|a| m.transition(x, a)[y] > S::zero()) {
                predecessors[y].push(x);
            }
        }
    }
    let mut reached = member.clone();
    let mut queue: VecDeque<usize> = (0..n).filter(|&x| member[x]).collect();
    while let Some(y) = queue.pop_front() {
        for &x in &predecessors[y] {
            if !reached[x] {
                reached[x] = true;
                queue.push_back(x);
            }
        }
    }
    for x in (0..n).filter(|&x| !reached[x]) {
        violations.push(AbsorbingViolation::Unreachable { state: x });
    }
    AbsorbingReport { violations }
}

#[derive(Debug, Clone, Copy)]
pub enum EpisodeMode<'a> {
    /// Exactly `horizon` transitions.
    Truncated { horizon: usize },
    /// Runs until `horizon` transitions have elapsed since the most recent
    /// first visit of a new pair, so every first-visit return has at least
    /// `horizon` rewards behind it.
    Tail { horizon: usize },
    /// Stops on entering △ (after drawing A_T), then continues `extension`
    /// further transitions inside △.
    Absorbed { triangle: &'a ValidatedAbsorbing, extension: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Truncated,
    Tail,
    /// `t_absorb` is T_△, the first time the chain is in △.
    Absorbed { t_absorb: usize },
}

/// One trajectory: pairs `(states[t], actions[t])` for `t = 0..=len()` and
/// rewards `rewards[t] = R_{t+1}` for `t < len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode<S = f64> {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<S>,
    pub termination: Termination,
    /// First visits are searched over indices `0..visit_range`.
    pub visit_range: usize,
}

impl<S: Scalar> Episode<S> {
    /// Number of transitions.
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// The same episode with every reward multiplied by `c`.
    pub fn scaled(&self, c: &S) -> Self {
        Self {
            rewards: self.rewards.iter().map(|r| r.clone() * c.clone()).collect(),
            ..self.clone()
        }
    }

    /// Episode CSV: `t,x,a,r`. The final pair has an empty reward cell.
    pub fn write_csv<T: Scalar>(&self, m: &Mdp<T>, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "t,x,a,r")?;
        for t in 0..self.states.len() {
            let x = self.states[t];
            let reward = self.rewards.get(t).map(|r| r.to_text()).unwrap_or_default();
            writeln!(
                out,
                "{t},{},{},{}",
                csv_field(m.state_name(x)),
                csv_field(m.action_name(x, self.actions[t])),
                reward
            )?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Simulates one episode. A pure function of its arguments.
///
/// Draw order: X_0 (when starting from a state distribution), A_0, then per
/// transition X_{t+1}, R_{t+1} (only when the reward has several support
/// points), A_{t+1}.
pub fn sample_episode<S: Scalar>(
    m: &Mdp<S>,
    pi: &StationaryPolicy<S>,
    start: &StartDist<S>,
    seed: SeedSpec,
    mode: EpisodeMode<'_>,
) -> Result<Episode<S>> {
    if let EpisodeMode::Absorbed { triangle, .. } = mode {
        if triangle.n_states() != m.n_states() {
            return Err(Error::Contract("absorbing spec was validated for another MDP".into()));
        }
    }
    let mut stream = seed.stream();
    let (x0, a0) = match start {
        StartDist::States(mu) => {
            let x = stream.categorical(mu);
            (x, stream.categorical(&pi.rows[x]))
        }
        StartDist::Pairs(nu) => {
            let flat: Vec<S> = nu.iter().flatten().cloned().collect();
            let mut idx = stream.categorical(&flat);
            let mut x = 0;
            while idx >= nu[x].len() {
                idx -= nu[x].len();
                x += 1;
            }
            (x, idx)
        }
    };
    let mut states = vec![x0];
    let mut actions = vec![a0];
    let mut rewards: Vec<S> = Vec::new();

    let mut step = |states: &mut Vec<usize>, actions: &mut Vec<usize>, rewards: &mut Vec<S>| {
        let x = *states.last().unwrap();
        let a = *actions.last().unwrap();
        let y = stream.categorical(m.transition(x, a));
        let dist = m.reward(x, a, y).support();
        let r = if dist.len() == 1 {
            dist[0].0.clone()
        } else {
            let probs: Vec<S> = dist.iter().map(|(_, p)| p.clone()).collect();
            dist[stream.categorical(&probs)].0.clone()
        };
        let next_a = stream.categorical(&pi.rows[y]);
        states.push(y);
        actions.push(next_a);
        rewards.push(r);
    };

    let (termination, visit_range) = match mode {
        EpisodeMode::Truncated { horizon } => {
            for _ in 0..horizon {
                step(&mut states, &mut actions, &mut rewards);
            }
            (Termination::Truncated, horizon)
        }
        EpisodeMode::Tail { horizon } => {
            let offsets: Vec<usize> = pair_offsets(m);
            let mut seen = vec![false; m.n_pairs()];
            seen[offsets[x0] + a0] = true;
            let mut last_new = 0;
            while rewards.len() < last_new + horizon {
                step(&mut states, &mut actions, &mut rewards);
                let t = rewards.len();
                let z = offsets[states[t]] + actions[t];
                if !seen[z] && t < last_new + horizon {
                    seen[z] = true;
                    last_new = t;
                }
            }
            let len = rewards.len();
            (Termination::Tail, len)
        }
        EpisodeMode::Absorbed { triangle, extension } => {
            while !triangle.contains(*states.last().unwrap()) {
                if rewards.len() >= ABSORBED_STEP_CAP {
                    return Err(Error::EpisodeCap { cap: ABSORBED_STEP_CAP });
                }
                step(&mut states, &mut actions, &mut rewards);
            }
            let t_absorb = rewards.len();
            for _ in 0..extension {
                step(&mut states, &mut actions, &mut rewards);
            }
            let range = if extension == 0 { t_absorb + 1 } else { rewards.len() };
            (Termination::Absorbed { t_absorb }, range)
        }
    };
    Ok(Episode { states, actions, rewards, termination, visit_range })
}

/// Flat index of pair `(x, 0)` for each state.
pub fn pair_offsets<S: Scalar>(m: &Mdp<S>) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(m.n_states());
    let mut acc = 0;
    for x in 0..m.n_states() {
        offsets.push(acc);
        acc += m.n_actions(x);
    }
    offsets
}

/// G_t = Σ_{s≥0} γ^s R_{t+s+1} for every `t = 0..=len`, by backward
/// recursion (`G_len = 0`).
pub fn returns<S: Scalar>(e: &Episode<S>, gamma: &S) -> Vec<S> {
    let mut out = vec![S::zero(); e.len() + 1];
    for t in (0..e.len()).rev() {
        out[t] = e.rewards[t].clone() + gamma.clone() * out[t + 1].clone();
    }
    out
}

/// Discounted return from index `t` over the recorded rewards.
pub fn discounted_return<S: Scalar>(e: &Episode<S>, t: usize, gamma: &S) -> Result<S> {
    if t > e.len() {
        return Err(Error::IndexOutOfRange { index: t, len: e.len() });
    }
    let mut g = S::zero();
    for r in e.rewards[t..].iter().rev() {
        g = r.clone() + gamma.clone() * g;
    }
    Ok(g)
}

/// Smallest `t` in the visit range with `(x_t, a_t) = (x, a)`; `None` is τ = ∞.
pub fn first_visit<S: Scalar>(e: &Episode<S>, x: usize, a: usize) -> Option<usize> {
    (0..e.visit_range).find(|&t| e.states[t] == x && e.actions[t] == a)
}

/// First-visit time of every pair in one pass; `result[x][a]`.
pub fn first_visits<S: Scalar, T: Scalar>(e: &Episode<S>, m: &Mdp<T>) -> Vec<Vec<Option<usize>>> {
    let mut tau: Vec<Vec<Option<usize>>> =
        (0..m.n_states()).map(|x| vec![None; m.n_actions(x)]).collect();
    for t in 0..e.visit_range {
        let slot = &mut tau[e.states[t]][e.actions[t]];
        if slot.is_none() {
            *slot = Some(t);
        }
    }
    tau
}

/// Smallest T with γ^T r_max / (1 - γ) ≤ tol (with 0^0 = 1).
pub fn horizon_for_tolerance(gamma: f64, r_max: f64, tol: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Argument(format!("gamma {gamma} outside [0,1)")));
    }
    if !(r_max >= 0.0) || !r_max.is_finite() {
        return Err(Error::Argument(format!("r_max {r_max} must be finite and non-negative")));
    }
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance {tol} must be positive")));
    }
    let scale = r_max / (1.0 - gamma);
    let mut t = 0usize;
    while scale * gamma.powi(t as i32) > tol {
        t += 1;
    }
    Ok(t)
}
