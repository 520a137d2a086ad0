//! Value tables and stationary Markov policies.

use crate::error::{Error, Result};
use crate::mdp::{sums_to_one, Mdp};
use crate::scalar::Scalar;

/// V(x) for every state.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction<S = f64> {
    pub values: Vec<S>,
}

impl<S: Scalar> ValueFunction<S> {
    pub fn new(values: Vec<S>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: vec![S::zero(); n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_distance(&self, other: &Self) -> S {
        self.values
            .iter()
            .zip(&other.values)
            .fold(S::zero(), |m, (a, b)| m.max_of((a.clone() - b.clone()).abs_val()))
    }

    pub fn sup_norm(&self) -> S {
        self.values.iter().fold(S::zero(), |m, v| m.max_of(v.abs_val()))
    }

    pub fn to_f64(&self) -> ValueFunction<f64> {
        ValueFunction { values: self.values.iter().map(Scalar::to_f64).collect() }
    }
}

/// Q(x,a) on the pair set; `rows[x][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QFunction<S = f64> {
    pub rows: Vec<Vec<S>>,
}

impl<S: Scalar> QFunction<S> {
    pub fn new(rows: Vec<Vec<S>>) -> Self {
        Self { rows }
    }

    pub fn zeros<T: Scalar>(mdp: &Mdp<T>) -> Self {
        Self {
            rows: (0..mdp.n_states()).map(|x| vec![S::zero(); mdp.n_actions(x)]).collect(),
        }
    }

    pub fn get(&self, x: usize, a: usize) -> &S {
        &self.rows[x][a]
    }

    pub fn set(&mut self, x: usize, a: usize, value: S) {
        self.rows[x][a] = value;
    }

    pub fn sup_distance(&self, other: &Self) -> S {
        self.rows
            .iter()
            .flatten()
            .zip(other.rows.iter().flatten())
            .fold(S::zero(), |m, (a, b)| m.max_of((a.clone() - b.clone()).abs_val()))
    }

    pub fn sup_norm(&self) -> S {
        self.rows.iter().flatten().fold(S::zero(), |m, v| m.max_of(v.abs_val()))
    }

    /// `max (self - other)_+`.
    pub fn positive_part_sup(&self, other: &Self) -> S {
        self.rows
            .iter()
            .flatten()
            .zip(other.rows.iter().flatten())
            .fold(S::zero(), |m, (a, b)| m.max_of(a.clone() - b.clone()))
    }

    /// Row maximum per state.
    pub fn state_max(&self) -> ValueFunction<S> {
        ValueFunction {
            values: self
                .rows
                .iter()
                .map(|row| {
                    row.iter()
                        .skip(1)
                        .fold(row[0].clone(), |m, v| m.max_of(v.clone()))
                })
                .collect(),
        }
    }

    /// Actions attaining the exact row maximum (no tolerance).
    pub fn argmax(&self, x: usize) -> Vec<usize> {
        let row = &self.rows[x];
        let best = row.iter().skip(1).fold(row[0].clone(), |m, v| m.max_of(v.clone()));
        row.iter()
            .enumerate()
            .filter(|(_, v)| **v == best)
            .map(|(a, _)| a)
            .collect()
    }

    pub fn to_f64(&self) -> QFunction<f64> {
        QFunction {
            rows: self
                .rows
                .iter()
                .map(|row| row.iter().map(Scalar::to_f64).collect())
                .collect(),
        }
    }

    pub fn matches_shape<T: Scalar>(&self, mdp: &Mdp<T>) -> bool {
        self.rows.len() == mdp.n_states()
            && self.rows.iter().enumerate().all(|(x, r)| r.len() == mdp.n_actions(x))
    }
}

/// π(x, .) for every state.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryPolicy<S = f64> {
    pub rows: Vec<Vec<S>>,
}

impl<S: Scalar> StationaryPolicy<S> {
    /// Validates row sums and non-negativity against `mdp`'s action sets.
    pub fn new<T: Scalar>(rows: Vec<Vec<S>>, mdp: &Mdp<T>) -> Result<Self> {
        let policy = Self { rows };
        policy.check(mdp)?;
        Ok(policy)
    }

    /// Point mass on `choices[x]` at each state.
    pub fn deterministic<T: Scalar>(choices: &[usize], mdp: &Mdp<T>) -> Result<Self> {
        if choices.len() != mdp.n_states() {
            return Err(Error::PolicyShape(format!(
                "{} choices for {} states",
                choices.len(),
                mdp.n_states()
            )));
        }
        let mut rows = Vec::with_capacity(choices.len());
        for (x, &c) in choices.iter().enumerate() {
            if c >= mdp.n_actions(x) {
                return Err(Error::UnknownPair { state: x, action: c });
            }
            let mut row = vec![S::zero(); mdp.n_actions(x)];
            row[c] = S::one();
            rows.push(row);
        }
        Ok(Self { rows })
    }

    pub fn uniform<T: Scalar>(mdp: &Mdp<T>) -> Self {
        Self {
            rows: (0..mdp.n_states())
                .map(|x| {
                    let n = mdp.n_actions(x);
                    vec![S::one() / S::from_u64(n as u64); n]
                })
                .collect(),
        }
    }

    pub fn prob(&self, x: usize, a: usize) -> &S {
        &self.rows[x][a]
    }

    pub fn check<T: Scalar>(&self, mdp: &Mdp<T>) -> Result<()> {
        if self.rows.len() != mdp.n_states() {
            return Err(Error::PolicyShape(format!(
                "{} rows for {} states",
                self.rows.len(),
                mdp.n_states()
            )));
        }
        for (x, row) in self.rows.iter().enumerate() {
            if row.len() != mdp.n_actions(x) {
                return Err(Error::PolicyShape(format!(
                    "state {x}: {} entries for {} actions",
                    row.len(),
                    mdp.n_actions(x)
                )));
            }
            if row.iter().any(|p| *p < S::zero()) {
                return Err(Error::PolicyShape(format!("state {x}: negative probability")));
            }
            let total = row.iter().fold(S::zero(), |acc, p| acc + p.clone());
            if !sums_to_one(&total) {
                return Err(Error::PolicyShape(format!(
                    "state {x}: row sums to {}",
                    total.to_text()
                )));
            }
        }
        Ok(())
    }

    /// True when every pair has positive probability.
    pub fn is_positive(&self) -> bool {
        self.rows.iter().flatten().all(|p| *p > S::zero())
    }
}
