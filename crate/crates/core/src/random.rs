//! Seeded random MDP generation with rational probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Mdp, MdpParts, RewardDist};
use crate::rng::Stream;
use crate::scalar::Scalar;

/// Missing fields take their [`Default`] values when deserialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomMdpSpec {
    pub n_states: usize,
    /// Each state gets between `min_actions` and `max_actions` actions.
    pub max_actions: usize,
    pub min_actions: usize,
    /// Written in decimal; parsed exactly by the rational backend.
    pub gamma: f64,
    /// Successor states per pair (capped at the state count).
    pub branching: usize,
    /// Reward values are multiples of 1/4 in this closed range.
    pub reward_range: (i64, i64),
    /// Support points per reward distribution (1 = deterministic rewards).
    pub reward_points: usize,
    /// Fraction of states placed in the triangle (rounded, at least one
    /// when positive, never all of them unless n_states == 1).
    pub absorbing_fraction: f64,
    /// Successors of a state outside the triangle all come later in the
    /// state order, so every episode is absorbed within `n_states` steps.
    pub acyclic: bool,
    pub seed: u64,
}

impl Default for RandomMdpSpec {
    fn default() -> Self {
        Self {
            n_states: 3,
            max_actions: 3,
            min_actions: 1,
            gamma: 0.4,
            branching: 2,
            reward_range: (0, 1),
            reward_points: 1,
            absorbing_fraction: 0.0,
            acyclic: false,
            seed: 0,
        }
    }
}

impl RandomMdpSpec {
    fn triangle_size(&self) -> usize {
        if self.absorbing_fraction <= 0.0 {
            return 0;
        }
        let n = self.n_states;
        let t = (self.absorbing_fraction * n as f64).round() as usize;
        t.clamp(1, n.saturating_sub(1).max(1))
    }

    pub fn generate<S: Scalar>(&self) -> Result<Mdp<S>> {
        if self.n_states == 0 || self.min_actions == 0 || self.branching == 0 {
            return Err(Error::Argument("state, action and branching counts must be positive".into()));
        }
        if self.min_actions > self.max_actions {
            return Err(Error::Argument("min_actions exceeds max_actions".into()));
        }
        if self.reward_points == 0 || self.reward_range.0 > self.reward_range.1 {
            return Err(Error::Argument("empty reward specification".into()));
        }
        if !(0.0..=1.0).contains(&self.absorbing_fraction) {
            return Err(Error::Argument("absorbing fraction outside [0,1]".into()));
        }
        let gamma = S::parse_number(&format!("{}", self.gamma))?;
        let n = self.n_states;
        let n_tri = self.triangle_size();
        let first_tri = n - n_tri;
        let mut rng = Stream::from_seed(self.seed);

        let mut actions = Vec::with_capacity(n);
        let mut transitions = Vec::with_capacity(n);
        let mut rewards = Vec::with_capacity(n);
        for x in 0..n {
            let absorbing = x >= first_tri && n_tri > 0;
            let spread = (self.max_actions - self.min_actions + 1) as u64;
            let n_act = self.min_actions + rng.below(spread) as usize;
            actions.push((0..n_act).map(|a| format!("a{a}")).collect::<Vec<_>>());
            let mut t_rows = Vec::with_capacity(n_act);
            let mut r_rows = Vec::with_capacity(n_act);
            for a in 0..n_act {
                // successor pool: the triangle for absorbing states
                let pool: Vec<usize> = if absorbing {
                    (first_tri..n).collect()
                } else if self.acyclic {
                    if x + 1 < n { (x + 1..n).collect() } else { vec![x] }
                } else {
                    (0..n).collect()
                };
                let mut succ = choose_distinct(&mut rng, &pool, self.branching.min(pool.len()));
                if !absorbing && n_tri > 0 && a == 0 && succ.iter().all(|&y| y < first_tri) {
                    let last = succ.len() - 1;
                    succ[last] = first_tri + rng.below(n_tri as u64) as usize;
                    succ.sort_unstable();
                    succ.dedup();
                }
                let weights: Vec<i64> = succ.iter().map(|_| 1 + rng.below(8) as i64).collect();
                let total: i64 = weights.iter().sum();
                let mut row = vec![S::zero(); n];
                for (&y, &w) in succ.iter().zip(&weights) {
                    row[y] = S::from_ratio(w, total);
                }
                t_rows.push(row);
                let r_row: Vec<RewardDist<S>> = (0..n)
                    .map(|_| {
                        if absorbing {
                            RewardDist::dirac(S::zero())
                        } else {
                            self.random_reward(&mut rng)
                        }
                    })
                    .collect();
                r_rows.push(r_row);
            }
            transitions.push(t_rows);
            rewards.push(r_rows);
        }
        Mdp::new(MdpParts {
            states: (0..n).map(|x| format!("s{x}")).collect(),
            actions,
            transitions,
            rewards,
            gamma,
            triangle: (n_tri > 0).then(|| (first_tri..n).collect()),
        })
    }

    fn random_reward<S: Scalar>(&self, rng: &mut Stream) -> RewardDist<S> {
        let (lo, hi) = self.reward_range;
        let span = (hi - lo) as u64 * 4 + 1;
        let k = self.reward_points;
        let values: Vec<i64> = (0..k).map(|_| lo * 4 + rng.below(span) as i64).collect();
        let weights: Vec<i64> = (0..k).map(|_| 1 + rng.below(4) as i64).collect();
        let total: i64 = weights.iter().sum();
        RewardDist::new(
            values
                .iter()
                .zip(&weights)
                .map(|(&v, &w)| (S::from_ratio(v, 4), S::from_ratio(w, total)))
                .collect(),
        )
        .expect("weights are positive and sum to one")
    }
}

fn choose_distinct(rng: &mut Stream, pool: &[usize], k: usize) -> Vec<usize> {
    let mut pool = pool.to_vec();
    for i in 0..k {
        let j = i + rng.below((pool.len() - i) as u64) as usize;
        pool.swap(i, j);
    }
    let mut out = pool[..k].to_vec();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::{check_absorbing, AbsorbingSpec};
    use crate::scalar::Rational;

    #[test]
    fn generation_is_deterministic() {
        let spec = RandomMdpSpec { seed: 11, ..Default::default() };
        let a: Mdp<Rational> = spec.generate().unwrap();
        let b: Mdp<Rational> = spec.generate().unwrap();
        assert_eq!(a, b);
        let c: Mdp<Rational> = RandomMdpSpec { seed: 12, ..spec }.generate().unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn absorbing_instances_pass_the_check() {
        for seed in 0..50 {
            let spec = RandomMdpSpec {
                n_states: 5,
                max_actions: 3,
                branching: 3,
                absorbing_fraction: 0.3,
                reward_points: 2,
                seed,
                ..Default::default()
            };
            let m: Mdp<Rational> = spec.generate().unwrap();
            let tri = AbsorbingSpec::from_mdp(&m).unwrap();
            assert!(check_absorbing(&m, &tri).passes(), "seed {seed}");
        }
    }

    #[test]
    fn acyclic_instances_only_move_forward() {
        for seed in 0..20 {
            let spec = RandomMdpSpec {
                n_states: 5,
                branching: 2,
                absorbing_fraction: 0.2,
                acyclic: true,
                seed,
                ..Default::default()
            };
            let m: Mdp<Rational> = spec.generate().unwrap();
            for x in 0..4 {
                for a in 0..m.n_actions(x) {
                    for y in 0..=x {
                        assert_eq!(m.transition(x, a)[y], Rational::from_ratio(0, 1));
                    }
                }
            }
        }
    }

    #[test]
    fn gamma_is_parsed_exactly() {
        let m: Mdp<Rational> = RandomMdpSpec { gamma: 0.1, ..Default::default() }.generate().unwrap();
        assert_eq!(*m.gamma(), Rational::from_ratio(1, 10));
    }
}
