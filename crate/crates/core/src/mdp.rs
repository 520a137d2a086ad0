//! Finite MDPs and their JSON interchange document.
//!
//! States and actions carry string ids in documents; internally they are
//! dense indices. `transitions[x][a][y]` is P(x,a,y) and `rewards[x][a][y]`
//! the reward distribution S(x,a,y,.).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Tolerance on probability sums in the float backend.
pub const PROB_TOL: f64 = 1e-12;

/// A reward distribution with finite support: `(value, probability)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardDist<S = f64> {
    support: Vec<(S, S)>,
}

impl<S: Scalar> RewardDist<S> {
    pub fn new(support: Vec<(S, S)>) -> Result<Self> {
        let dist = Self { support };
        let mut findings = Vec::new();
        dist.check("reward", &mut findings);
        match findings.is_empty() {
            true => Ok(dist),
            false => Err(Error::InvalidMdp(ValidationReport { findings })),
        }
    }

    /// Point mass at `value`.
    pub fn dirac(value: S) -> Self {
        Self { support: vec![(value, S::one())] }
    }

    pub fn support(&self) -> &[(S, S)] {
        &self.support
    }

    /// g(x,a,y), the mean of the distribution.
    pub fn mean(&self) -> S {
        self.support
            .iter()
            .fold(S::zero(), |acc, (v, p)| acc + v.clone() * p.clone())
    }

    /// True when every support point carrying mass is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.support
            .iter()
            .all(|(v, p)| *p == S::zero() || *v == S::zero())
    }

    pub fn max_abs(&self) -> f64 {
        self.support
            .iter()
            .filter(|(_, p)| *p > S::zero())
            .map(|(v, _)| v.to_f64().abs())
            .fold(0.0, f64::max)
    }

    pub fn map_scalar<T: Scalar>(&self, f: &impl Fn(&S) -> T) -> RewardDist<T> {
        RewardDist {
            support: self.support.iter().map(|(v, p)| (f(v), f(p))).collect(),
        }
    }

    fn check(&self, at: &str, findings: &mut Vec<Finding>) {
        if self.support.is_empty() {
            findings.push(Finding::new("reward_empty", format!("{at}: empty reward support")));
            return;
        }
        if self.support.iter().any(|(v, _)| !v.to_f64().is_finite()) {
            findings.push(Finding::new("reward_value", format!("{at}: non-finite reward value")));
        }
        if self.support.iter().any(|(_, p)| *p < S::zero()) {
            findings.push(Finding::new("reward_prob", format!("{at}: negative probability")));
        }
        let total = self.support.iter().fold(S::zero(), |acc, (_, p)| acc + p.clone());
        if !sums_to_one(&total) {
            findings.push(Finding::new(
                "reward_sum",
                format!("{at}: probabilities sum to {}", total.to_text()),
            ));
        }
    }
}

pub(crate) fn sums_to_one<S: Scalar>(total: &S) -> bool {
    if S::EXACT {
        *total == S::one()
    } else {
        (total.to_f64() - 1.0).abs() <= PROB_TOL
    }
}

/// One failed check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub clause: String,
    pub detail: String,
}

impl Finding {
    pub fn new(clause: &str, detail: String) -> Self {
        Self { clause: clause.to_string(), detail }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .findings
            .iter()
            .map(|x| format!("[{}] {}", x.clause, x.detail))
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Raw components of an [`Mdp`], validated by [`Mdp::new`].
#[derive(Debug, Clone)]
pub struct MdpParts<S = f64> {
    pub states: Vec<String>,
    pub actions: Vec<Vec<String>>,
    pub transitions: Vec<Vec<Vec<S>>>,
    pub rewards: Vec<Vec<Vec<RewardDist<S>>>>,
    pub gamma: S,
    pub triangle: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mdp<S = f64> {
    states: Vec<String>,
    actions: Vec<Vec<String>>,
    transitions: Vec<Vec<Vec<S>>>,
    rewards: Vec<Vec<Vec<RewardDist<S>>>>,
    gamma: S,
    triangle: Option<Vec<usize>>,
}

impl<S: Scalar> Mdp<S> {
    pub fn new(parts: MdpParts<S>) -> Result<Self> {
        let report = validate_parts(&parts);
        if !report.is_empty() {
            return Err(Error::InvalidMdp(report));
        }
        let MdpParts { states, actions, transitions, rewards, gamma, triangle } = parts;
        Ok(Self { states, actions, transitions, rewards, gamma, triangle })
    }

    /// Builds an MDP with states and actions named by their indices.
    pub fn from_tables(
        transitions: Vec<Vec<Vec<S>>>,
        rewards: Vec<Vec<Vec<RewardDist<S>>>>,
        gamma: S,
    ) -> Result<Self> {
        let states = (0..transitions.len()).map(|x| x.to_string()).collect();
        let actions = transitions
            .iter()
            .map(|row| (0..row.len()).map(|a| a.to_string()).collect())
            .collect();
        Self::new(MdpParts { states, actions, transitions, rewards, gamma, triangle: None })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self, x: usize) -> usize {
        self.actions[x].len()
    }

    /// |Z|, the number of state-action pairs.
    pub fn n_pairs(&self) -> usize {
        self.actions.iter().map(Vec::len).sum()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_states()).flat_map(move |x| (0..self.n_actions(x)).map(move |a| (x, a)))
    }

    pub fn gamma(&self) -> &S {
        &self.gamma
    }

    pub fn transition(&self, x: usize, a: usize) -> &[S] {
        &self.transitions[x][a]
    }

    pub fn reward(&self, x: usize, a: usize, y: usize) -> &RewardDist<S> {
        &self.rewards[x][a][y]
    }

    pub fn state_name(&self, x: usize) -> &str {
        &self.states[x]
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn action_name(&self, x: usize, a: usize) -> &str {
        &self.actions[x][a]
    }

    pub fn state_index(&self, id: &str) -> Option<usize> {
        self.states.iter().position(|s| s == id)
    }

    pub fn action_index(&self, x: usize, id: &str) -> Option<usize> {
        self.actions[x].iter().position(|s| s == id)
    }

    pub fn contains_pair(&self, x: usize, a: usize) -> bool {
        x < self.n_states() && a < self.n_actions(x)
    }

    /// Triangle (absorbing set) declared in the document, as state indices.
    pub fn triangle(&self) -> Option<&[usize]> {
        self.triangle.as_deref()
    }

    pub fn with_triangle(mut self, triangle: Option<Vec<usize>>) -> Result<Self> {
        if let Some(t) = &triangle {
            if let Some(bad) = t.iter().find(|&&x| x >= self.n_states()) {
                return Err(Error::Argument(format!("triangle state {bad} out of range")));
            }
        }
        self.triangle = triangle;
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: S) -> Result<Self> {
        if gamma < S::zero() || gamma >= S::one() {
            return Err(Error::Argument(format!("gamma {} outside [0,1)", gamma.to_text())));
        }
        self.gamma = gamma;
        Ok(self)
    }

    /// Largest |reward| with positive probability anywhere.
    pub fn max_abs_reward(&self) -> f64 {
        self.rewards
            .iter()
            .flatten()
            .flatten()
            .map(RewardDist::max_abs)
            .fold(0.0, f64::max)
    }

    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Mdp<T> {
        Mdp {
            states: self.states.clone(),
            actions: self.actions.clone(),
            transitions: self
                .transitions
                .iter()
                .map(|rows| rows.iter().map(|row| row.iter().map(&f).collect()).collect())
                .collect(),
            rewards: self
                .rewards
                .iter()
                .map(|rows| {
                    rows.iter()
                        .map(|row| row.iter().map(|d| d.map_scalar(&f)).collect())
                        .collect()
                })
                .collect(),
            gamma: f(&self.gamma),
            triangle: self.triangle.clone(),
        }
    }

    pub fn to_f64(&self) -> Mdp<f64> {
        self.map_scalar(|v| v.to_f64())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: MdpDocument = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_document(doc: &MdpDocument) -> Result<Self> {
        let parts = parts_from_document(doc)?;
        Self::new(parts)
    }

    pub fn to_document(&self) -> MdpDocument {
        let mut actions = BTreeMap::new();
        let mut transitions = BTreeMap::new();
        let mut rewards = BTreeMap::new();
        for x in 0..self.n_states() {
            actions.insert(self.states[x].clone(), self.actions[x].clone());
            for a in 0..self.n_actions(x) {
                let key = format!("{}|{}", self.states[x], self.actions[x][a]);
                let mut row = BTreeMap::new();
                for (y, p) in self.transitions[x][a].iter().enumerate() {
                    if *p != S::zero() {
                        row.insert(self.states[y].clone(), NumberText::from_scalar(p));
                        let dist = &self.rewards[x][a][y];
                        let support = dist
                            .support()
                            .iter()
                            .map(|(v, q)| (NumberText::from_scalar(v), NumberText::from_scalar(q)))
                            .collect();
                        rewards.insert(format!("{key}|{}", self.states[y]), support);
                    }
                }
                transitions.insert(key, row);
            }
        }
        MdpDocument {
            gamma: NumberText::from_scalar(&self.gamma),
            states: self.states.clone(),
            actions,
            transitions,
            rewards,
            triangle: self
                .triangle
                .as_ref()
                .map(|t| t.iter().map(|&x| self.states[x].clone()).collect()),
        }
    }
}

/// All invariant checks on raw parts; an empty report means valid.
pub fn validate_parts<S: Scalar>(parts: &MdpParts<S>) -> ValidationReport {
    let mut findings = Vec::new();
    let n = parts.states.len();
    if n == 0 {
        findings.push(Finding::new("states_empty", "state space is empty".into()));
    }
    let mut seen = HashSet::new();
    for s in &parts.states {
        if !seen.insert(s) {
            findings.push(Finding::new("state_duplicate", format!("state {s:?} listed twice")));
        }
        if s.contains('|') {
            findings.push(Finding::new("state_id", format!("state id {s:?} contains '|'")));
        }
    }
    if parts.gamma < S::zero() || parts.gamma >= S::one() {
        findings.push(Finding::new(
            "gamma_range",
            format!("gamma {} outside [0,1)", parts.gamma.to_text()),
        ));
    }
    if parts.actions.len() != n || parts.transitions.len() != n || parts.rewards.len() != n {
        findings.push(Finding::new("shape", "per-state tables do not match the state count".into()));
        return ValidationReport { findings };
    }
    for x in 0..n {
        let name = &parts.states[x];
        let acts = &parts.actions[x];
        if acts.is_empty() {
            findings.push(Finding::new("actions_empty", format!("state {name:?} has no action")));
        }
        let mut seen = HashSet::new();
        for a in acts {
            if !seen.insert(a) {
                findings.push(Finding::new(
                    "action_duplicate",
                    format!("action {a:?} listed twice at state {name:?}"),
                ));
            }
        }
        if parts.transitions[x].len() != acts.len() || parts.rewards[x].len() != acts.len() {
            findings.push(Finding::new(
                "shape",
                format!("state {name:?}: tables do not match the action count"),
            ));
            continue;
        }
        for (a, act) in acts.iter().enumerate() {
            let at = format!("({name}, {act})");
            let row = &parts.transitions[x][a];
            if row.len() != n || parts.rewards[x][a].len() != n {
                findings.push(Finding::new("shape", format!("{at}: row length differs from state count")));
                continue;
            }
            if row.iter().any(|p| *p < S::zero()) {
                findings.push(Finding::new("transition_negative", format!("{at}: negative probability")));
            }
            let total = row.iter().fold(S::zero(), |acc, p| acc + p.clone());
            if !sums_to_one(&total) {
                findings.push(Finding::new(
                    "transition_sum",
                    format!("{at}: transition row sums to {}", total.to_text()),
                ));
            }
            for (y, dist) in parts.rewards[x][a].iter().enumerate() {
                dist.check(&format!("({name}, {act}, {})", parts.states[y]), &mut findings);
            }
        }
    }
    if let Some(t) = &parts.triangle {
        for &x in t {
            if x >= n {
                findings.push(Finding::new("triangle_state", format!("triangle index {x} out of range")));
            }
        }
    }
    ValidationReport { findings }
}

/// A JSON number or a rational string such as `"3/4"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumberText {
    Number(serde_json::Number),
    Text(String),
}

impl NumberText {
    pub fn parse<S: Scalar>(&self) -> Result<S> {
        Ok(match self {
            NumberText::Number(n) => S::parse_number(&n.to_string())?,
            NumberText::Text(t) => S::parse_number(t)?,
        })
    }

    /// Rationals are written as strings, floats as JSON numbers.
    pub fn from_scalar<S: Scalar>(value: &S) -> Self {
        if S::EXACT {
            NumberText::Text(value.to_text())
        } else {
            serde_json::Number::from_f64(value.to_f64())
                .map(NumberText::Number)
                .unwrap_or_else(|| NumberText::Text(value.to_text()))
        }
    }
}

/// The MDP interchange document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpDocument {
    pub gamma: NumberText,
    pub states: Vec<String>,
    pub actions: BTreeMap<String, Vec<String>>,
    pub transitions: BTreeMap<String, BTreeMap<String, NumberText>>,
    #[serde(default)]
    pub rewards: BTreeMap<String, Vec<(NumberText, NumberText)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triangle: Option<Vec<String>>,
}

/// Converts a document to parts. Structural problems (unknown ids, missing
/// action lists) become findings; number syntax errors are hard errors.
/// Triples without a reward entry get the point mass at 0.
pub fn parts_from_document<S: Scalar>(doc: &MdpDocument) -> Result<MdpParts<S>> {
    let mut findings = Vec::new();
    let index: HashMap<&str, usize> = doc
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let n = doc.states.len();
    let gamma: S = doc.gamma.parse()?;

    let mut actions = Vec::with_capacity(n);
    for s in &doc.states {
        match doc.actions.get(s) {
            Some(list) => actions.push(list.clone()),
            None => {
                findings.push(Finding::new("actions_empty", format!("state {s:?} has no action list")));
                actions.push(Vec::new());
            }
        }
    }
    for s in doc.actions.keys() {
        if !index.contains_key(s.as_str()) {
            findings.push(Finding::new("unknown_state", format!("actions given for unknown state {s:?}")));
        }
    }

    let mut transitions: Vec<Vec<Vec<S>>> = actions
        .iter()
        .map(|acts| vec![vec![S::zero(); n]; acts.len()])
        .collect();
    let mut rewards: Vec<Vec<Vec<RewardDist<S>>>> = actions
        .iter()
        .map(|acts| vec![vec![RewardDist::dirac(S::zero()); n]; acts.len()])
        .collect();

    let lookup_pair = |key: &str, findings: &mut Vec<Finding>| -> Option<(usize, usize)> {
        let (s, a) = key.split_once('|')?;
        let x = match index.get(s) {
            Some(&x) => x,
            None => {
                findings.push(Finding::new("unknown_state", format!("key {key:?}: unknown state {s:?}")));
                return None;
            }
        };
        match actions[x].iter().position(|id| id == a) {
            Some(ai) => Some((x, ai)),
            None => {
                findings.push(Finding::new("unknown_action", format!("key {key:?}: unknown action {a:?}")));
                None
            }
        }
    };

    for (key, row) in &doc.transitions {
        if key.matches('|').count() != 1 {
            findings.push(Finding::new("key_format", format!("transition key {key:?} is not \"x|a\"")));
            continue;
        }
        let Some((x, a)) = lookup_pair(key, &mut findings) else { continue };
        for (y_id, p) in row {
            match index.get(y_id.as_str()) {
                Some(&y) => transitions[x][a][y] = p.parse()?,
                None => findings.push(Finding::new(
                    "unknown_state",
                    format!("transition {key:?} targets unknown state {y_id:?}"),
                )),
            }
        }
    }
    for x in 0..n {
        for a in 0..actions[x].len() {
            let key = format!("{}|{}", doc.states[x], actions[x][a]);
            if !doc.transitions.contains_key(&key) {
                findings.push(Finding::new("transition_missing", format!("no transition row for {key:?}")));
            }
        }
    }
    for (key, support) in &doc.rewards {
        let Some((pair_key, y_id)) = key.rsplit_once('|') else {
            findings.push(Finding::new("key_format", format!("reward key {key:?} is not \"x|a|y\"")));
            continue;
        };
        if pair_key.matches('|').count() != 1 {
            findings.push(Finding::new("key_format", format!("reward key {key:?} is not \"x|a|y\"")));
            continue;
        }
        let Some((x, a)) = lookup_pair(pair_key, &mut findings) else { continue };
        let Some(&y) = index.get(y_id) else {
            findings.push(Finding::new("unknown_state", format!("reward {key:?}: unknown state {y_id:?}")));
            continue;
        };
        let mut points = Vec::with_capacity(support.len());
        for (v, p) in support {
            points.push((v.parse()?, p.parse()?));
        }
        rewards[x][a][y] = RewardDist { support: points };
    }

    let triangle = match &doc.triangle {
        None => None,
        Some(ids) => {
            let mut t = Vec::new();
            for id in ids {
                match index.get(id.as_str()) {
                    Some(&x) => t.push(x),
                    None => findings.push(Finding::new(
                        "triangle_state",
                        format!("triangle lists unknown state {id:?}"),
                    )),
                }
            }
            Some(t)
        }
    };

    let parts = MdpParts { states: doc.states.clone(), actions, transitions, rewards, gamma, triangle };
    if !findings.is_empty() {
        findings.extend(validate_parts(&parts).findings);
        return Err(Error::InvalidMdp(ValidationReport { findings }));
    }
    Ok(parts)
}
