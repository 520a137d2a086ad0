//! Exact and iterative solvers for V_π, Q_π, V*, Q* and the operator
//! H(ε, q) = Q of the ε-greedy policy built on q.

use crate::error::{Error, Result};
use crate::linalg;
use crate::mdp::Mdp;
use crate::scalar::Scalar;
use crate::tables::{QFunction, StationaryPolicy, ValueFunction};

/// Upper bound on the number of deterministic policies brute force will try.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Iteration cap for the fixed-point solvers; only reachable when rounding
/// noise exceeds the requested tolerance.
const MAX_ITERATIONS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Evaluation {
    /// Solve (I - γ P_π) V = r_π directly.
    LinearSolve,
    /// Iterate T_π until the sup-norm change drops below `tol`.
    FixedPoint { tol: f64 },
}

/// r(x,a) = Σ_y P(x,a,y) g(x,a,y).
pub fn mean_reward<S: Scalar>(m: &Mdp<S>, x: usize, a: usize) -> Result<S> {
    if !m.contains_pair(x, a) {
        return Err(Error::UnknownPair { state: x, action: a });
    }
    Ok(m.transition(x, a)
        .iter()
        .enumerate()
        .filter(|(_, p)| **p != S::zero())
        .fold(S::zero(), |acc, (y, p)| acc + p.clone() * m.reward(x, a, y).mean()))
}

/// r(x,a) for every pair.
pub fn mean_rewards<S: Scalar>(m: &Mdp<S>) -> QFunction<S> {
    QFunction::new(
        (0..m.n_states())
            .map(|x| {
                (0..m.n_actions(x))
                    .map(|a| mean_reward(m, x, a).expect("pair in range"))
                    .collect()
            })
            .collect(),
    )
}

/// (r_π, P_π): the reward vector and transition matrix of the chain under π.
pub fn policy_matrices<S: Scalar>(
    m: &Mdp<S>,
    pi: &StationaryPolicy<S>,
) -> Result<(Vec<S>, Vec<Vec<S>>)> {
    pi.check(m)?;
    let n = m.n_states();
    let r = mean_rewards(m);
    let mut r_pi = vec![S::zero(); n];
    let mut p_pi = vec![vec![S::zero(); n]; n];
    for x in 0..n {
        for a in 0..m.n_actions(x) {
            let w = pi.prob(x, a);
            if *w == S::zero() {
                continue;
            }
            r_pi[x] = r_pi[x].clone() + r.get(x, a).clone() * w.clone();
            for (y, p) in m.transition(x, a).iter().enumerate() {
                p_pi[x][y] = p_pi[x][y].clone() + p.clone() * w.clone();
            }
        }
    }
    Ok((r_pi, p_pi))
}

/// PV(x,a) = Σ_y P(x,a,y) v(y).
fn expected_next<S: Scalar>(m: &Mdp<S>, x: usize, a: usize, v: &ValueFunction<S>) -> S {
    m.transition(x, a)
        .iter()
        .zip(&v.values)
        .filter(|(p, _)| **p != S::zero())
        .fold(S::zero(), |acc, (p, vy)| acc + p.clone() * vy.clone())
}

/// Q(x,a) = r(x,a) + γ Σ_y P(x,a,y) v(y).
pub fn q_from_v<S: Scalar>(m: &Mdp<S>, v: &ValueFunction<S>) -> QFunction<S> {
    let r = mean_rewards(m);
    let gamma = m.gamma().clone();
    QFunction::new(
        (0..m.n_states())
            .map(|x| {
                (0..m.n_actions(x))
                    .map(|a| r.get(x, a).clone() + gamma.clone() * expected_next(m, x, a, v))
                    .collect()
            })
            .collect(),
    )
}

/// The optimality operator: v ↦ max_a [r(x,a) + γ P v(x,a)].
pub fn bellman_optimal<S: Scalar>(m: &Mdp<S>, v: &ValueFunction<S>) -> ValueFunction<S> {
    q_from_v(m, v).state_max()
}

/// The policy operator T_π: v ↦ r_π + γ P_π v.
pub fn bellman_policy<S: Scalar>(
    m: &Mdp<S>,
    pi: &StationaryPolicy<S>,
    v: &ValueFunction<S>,
) -> Result<ValueFunction<S>> {
    let (r_pi, p_pi) = policy_matrices(m, pi)?;
    Ok(apply_policy_operator(m.gamma(), &r_pi, &p_pi, v))
}

fn apply_policy_operator<S: Scalar>(
    gamma: &S,
    r_pi: &[S],
    p_pi: &[Vec<S>],
    v: &ValueFunction<S>,
) -> ValueFunction<S> {
    ValueFunction::new(
        r_pi.iter()
            .zip(p_pi)
            .map(|(r, row)| {
                let pv = row
                    .iter()
                    .zip(&v.values)
                    .fold(S::zero(), |acc, (p, vy)| acc + p.clone() * vy.clone());
                r.clone() + gamma.clone() * pv
            })
            .collect(),
    )
}

/// V_π, by direct solve or by fixed-point iteration of T_π.
///
/// The fixed-point route stops once an iteration moves less than `tol` in
/// sup norm, which bounds the error by `tol * γ / (1 - γ)`.
pub fn policy_evaluation<S: Scalar>(
    m: &Mdp<S>,
    pi: &StationaryPolicy<S>,
    method: Evaluation,
) -> Result<ValueFunction<S>> {
    let (r_pi, p_pi) = policy_matrices(m, pi)?;
    let gamma = m.gamma().clone();
    match method {
        Evaluation::LinearSolve => {
            let n = m.n_states();
            let a = (0..n)
                .map(|x| {
                    (0..n)
                        .map(|y| {
                            let id = if x == y { S::one() } else { S::zero() };
                            id - gamma.clone() * p_pi[x][y].clone()
                        })
                        .collect()
                })
                .collect();
            Ok(ValueFunction::new(linalg::solve(a, r_pi)?))
        }
        Evaluation::FixedPoint { tol } => {
            if !(tol > 0.0) {
                return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
            }
            let mut v = ValueFunction::zeros(m.n_states());
            for _ in 0..MAX_ITERATIONS {
                let next = apply_policy_operator(&gamma, &r_pi, &p_pi, &v);
                let change = next.sup_distance(&v).to_f64();
                v = next;
                if change < tol || gamma == S::zero() {
                    return Ok(v);
                }
            }
            Err(Error::Argument(format!("policy evaluation did not reach tolerance {tol}")))
        }
    }
}

/// Q_π = q_from_v(V_π) with V_π from a direct solve.
pub fn policy_q<S: Scalar>(m: &Mdp<S>, pi: &StationaryPolicy<S>) -> Result<QFunction<S>> {
    let v = policy_evaluation(m, pi, Evaluation::LinearSolve)?;
    Ok(q_from_v(m, &v))
}

/// Value iteration from the zero function.
///
/// Stops when the sup-norm change falls below `tol (1 - γ) / γ`, so the
/// returned `v` is within `tol` of V*.
pub fn value_iteration<S: Scalar>(
    m: &Mdp<S>,
    tol: f64,
) -> Result<(ValueFunction<S>, QFunction<S>)> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    let gamma = m.gamma().to_f64();
    let threshold = if gamma == 0.0 { f64::INFINITY } else { tol * (1.0 - gamma) / gamma };
    let mut v = ValueFunction::zeros(m.n_states());
    for _ in 0..MAX_ITERATIONS {
        let next = bellman_optimal(m, &v);
        let change = next.sup_distance(&v).to_f64();
        v = next;
        if change < threshold {
            let q = q_from_v(m, &v);
            return Ok((v, q));
        }
    }
    Err(Error::Argument(format!("value iteration did not reach tolerance {tol}")))
}

/// Howard's policy iteration from the all-first-action policy. Exact in the
/// rational backend: the result is V* and Q* themselves, with a greedy
/// deterministic policy. The current action is kept whenever it ties.
pub fn policy_iteration<S: Scalar>(
    m: &Mdp<S>,
) -> Result<(ValueFunction<S>, QFunction<S>, Vec<usize>)> {
    let mut choice = vec![0usize; m.n_states()];
    for _ in 0..MAX_ITERATIONS {
        let pi = StationaryPolicy::deterministic(&choice, m)?;
        let v = policy_evaluation(m, &pi, Evaluation::LinearSolve)?;
        let q = q_from_v(m, &v);
        let mut changed = false;
        for (x, c) in choice.iter_mut().enumerate() {
            let row = &q.rows[x];
            let best = q.argmax(x)[0];
            if row[best] > row[*c] {
                *c = best;
                changed = true;
            }
        }
        if !changed {
            return Ok((v, q, choice));
        }
    }
    Err(Error::Argument("policy iteration did not terminate".into()))
}

/// Number of deterministic stationary policies, Π_x |A_x|.
pub fn deterministic_policy_count<S: Scalar>(m: &Mdp<S>) -> u128 {
    (0..m.n_states()).fold(1u128, |acc, x| acc.saturating_mul(m.n_actions(x) as u128))
}

/// Ground truth by enumeration: evaluates every deterministic policy with a
/// direct solve and takes the pointwise maximum. The returned policy is the
/// first one (in mixed-radix order) with the largest total value.
pub fn brute_force_optimal<S: Scalar>(
    m: &Mdp<S>,
) -> Result<(ValueFunction<S>, StationaryPolicy<S>)> {
    let count = deterministic_policy_count(m);
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge { count, limit: ENUMERATION_LIMIT });
    }
    let n = m.n_states();
    let mut choice = vec![0usize; n];
    let mut best: Option<ValueFunction<S>> = None;
    let mut best_policy: Option<(S, StationaryPolicy<S>)> = None;
    loop {
        let pi = StationaryPolicy::deterministic(&choice, m)?;
        let v = policy_evaluation(m, &pi, Evaluation::LinearSolve)?;
        let total = v.values.iter().fold(S::zero(), |acc, x| acc + x.clone());
        best = Some(match best {
            None => v,
            Some(b) => ValueFunction::new(
                b.values.into_iter().zip(v.values).map(|(p, q)| p.max_of(q)).collect(),
            ),
        });
        if best_policy.as_ref().map_or(true, |(t, _)| total > *t) {
            best_policy = Some((total, pi));
        }
        // mixed-radix increment
        let mut x = 0;
        loop {
            if x == n {
                let (_, policy) = best_policy.expect("at least one policy");
                return Ok((best.expect("at least one policy"), policy));
            }
            choice[x] += 1;
            if choice[x] < m.n_actions(x) {
                break;
            }
            choice[x] = 0;
            x += 1;
        }
    }
}

/// π^ε_q(x,a) = ε(x)/|A_x| + 1{a ∈ argmax q(x,.)} (1 - ε(x)) / |argmax q(x,.)|.
///
/// The argmax set uses exact equality with the row maximum.
pub fn epsilon_greedy<S: Scalar>(q: &QFunction<S>, eps: &[S]) -> StationaryPolicy<S> {
    let rows = q
        .rows
        .iter()
        .enumerate()
        .map(|(x, row)| {
            let n = S::from_u64(row.len() as u64);
            let best = q.argmax(x);
            let explore = eps[x].clone() / n;
            let exploit = (S::one() - eps[x].clone()) / S::from_u64(best.len() as u64);
            let mut out = vec![explore; row.len()];
            for a in best {
                out[a] = out[a].clone() + exploit.clone();
            }
            out
        })
        .collect();
    StationaryPolicy { rows }
}

/// H(ε, q) = Q of π^ε_q, computed with a direct solve.
pub fn h_operator<S: Scalar>(m: &Mdp<S>, eps: &[S], q: &QFunction<S>) -> Result<QFunction<S>> {
    if eps.len() != m.n_states() || !q.matches_shape(m) {
        return Err(Error::PolicyShape("ε or q does not match the MDP".into()));
    }
    if eps.iter().any(|e| *e < S::zero() || *e > S::one()) {
        return Err(Error::Argument("ε values must lie in [0,1]".into()));
    }
    policy_q(m, &epsilon_greedy(q, eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::counterexample_mdp;
    use crate::mdp::RewardDist;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn counterexample_mean_rewards() {
        let m = counterexample_mdp(0.75);
        assert_eq!(mean_reward(&m, 0, 0).unwrap(), 0.0);
        assert_eq!(mean_reward(&m, 0, 1).unwrap(), 1.0);
        assert!(matches!(mean_reward(&m, 0, 2), Err(Error::UnknownPair { .. })));
        assert!(matches!(mean_reward(&m, 1, 0), Err(Error::UnknownPair { .. })));
    }

    #[test]
    fn uniform_reward_support_mean() {
        let d = || RewardDist::new(vec![(1.0, 0.5), (3.0, 0.5)]).unwrap();
        let m = Mdp::from_tables(
            vec![vec![vec![0.5, 0.5]], vec![vec![0.25, 0.75], vec![1.0, 0.0]]],
            vec![vec![vec![d(), d()]], vec![vec![d(), d()], vec![d(), d()]]],
            0.5,
        )
        .unwrap();
        let r = mean_rewards(&m);
        assert!(r.rows.iter().flatten().all(|v| *v == 2.0));
    }

    #[test]
    fn all_zero_rewards() {
        let z = || RewardDist::dirac(0.0);
        let m = Mdp::from_tables(
            vec![vec![vec![0.5, 0.5], vec![0.0, 1.0]], vec![vec![1.0, 0.0]]],
            vec![vec![vec![z(), z()], vec![z(), z()]], vec![vec![z(), z()]]],
            0.9,
        )
        .unwrap();
        assert!(mean_rewards(&m).rows.iter().flatten().all(|v| *v == 0.0));
        let (v, _) = value_iteration(&m, 1e-10).unwrap();
        assert!(v.values.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn counterexample_policy_matrices() {
        let m = counterexample_mdp(0.75);
        let pi1 = StationaryPolicy::deterministic(&[1], &m).unwrap();
        let (r, p) = policy_matrices(&m, &pi1).unwrap();
        assert_eq!(r, vec![1.0]);
        assert_eq!(p, vec![vec![1.0]]);
        let uni = StationaryPolicy::uniform(&m);
        let (r, _) = policy_matrices(&m, &uni).unwrap();
        assert_eq!(r, vec![0.5]);
    }

    #[test]
    fn counterexample_policy_values_exact() {
        let m = counterexample_mdp(q(3, 4));
        let pi0 = StationaryPolicy::deterministic(&[0], &m).unwrap();
        let pi1 = StationaryPolicy::deterministic(&[1], &m).unwrap();
        let v0 = policy_evaluation(&m, &pi0, Evaluation::LinearSolve).unwrap();
        let v1 = policy_evaluation(&m, &pi1, Evaluation::LinearSolve).unwrap();
        assert_eq!(v0.values, vec![q(0, 1)]);
        assert_eq!(v1.values, vec![q(4, 1)]);
        let q0 = q_from_v(&m, &v0);
        assert_eq!(q0.rows, vec![vec![q(0, 1), q(1, 1)]]);
    }

    #[test]
    fn gamma_zero_returns_rewards() {
        let m = counterexample_mdp(0.0);
        let pi = StationaryPolicy::uniform(&m);
        let v = policy_evaluation(&m, &pi, Evaluation::FixedPoint { tol: 1e-12 }).unwrap();
        assert_eq!(v.values, vec![0.5]);
        let any = ValueFunction::new(vec![123.0]);
        assert_eq!(q_from_v(&m, &any).rows, vec![vec![0.0, 1.0]]);
        assert_eq!(bellman_optimal(&m, &any).values, vec![1.0]);
    }

    #[test]
    fn q_star_at_gamma_04() {
        let m = counterexample_mdp(q(2, 5));
        let (v, qs) = brute_force_optimal(&m).map(|(v, _)| (v.clone(), q_from_v(&m, &v))).unwrap();
        assert_eq!(v.values, vec![q(5, 3)]);
        assert_eq!(qs.rows, vec![vec![q(2, 3), q(5, 3)]]);
    }

    #[test]
    fn constant_v_shifts_q() {
        let m = counterexample_mdp(0.5);
        let c = ValueFunction::new(vec![3.0]);
        assert_eq!(q_from_v(&m, &c).rows, vec![vec![1.5, 2.5]]);
    }

    #[test]
    fn bellman_one_step_from_zero() {
        let m = counterexample_mdp(0.75);
        assert_eq!(bellman_optimal(&m, &ValueFunction::zeros(1)).values, vec![1.0]);
    }

    #[test]
    fn value_iteration_counterexample() {
        let m = counterexample_mdp(0.75);
        let (v, q) = value_iteration(&m, 1e-12).unwrap();
        assert!((v.values[0] - 4.0).abs() < 1e-10);
        assert!((q.rows[0][0] - 3.0).abs() < 1e-10);
        assert!((q.rows[0][1] - 4.0).abs() < 1e-10);
        // fixed point of the optimality operator
        let tv = bellman_optimal(&m, &v);
        assert!(tv.sup_distance(&v) < 1e-11);
    }

    #[test]
    fn policy_iteration_agrees_with_enumeration() {
        for seed in 0..20 {
            let m: Mdp<Rational> = crate::random::RandomMdpSpec { seed, ..Default::default() }.generate().unwrap();
            let (v, q, choice) = policy_iteration(&m).unwrap();
            let (v_bf, _) = brute_force_optimal(&m).unwrap();
            assert_eq!(v, v_bf, "seed {seed}");
            assert_eq!(q, q_from_v(&m, &v_bf));
            for (x, &c) in choice.iter().enumerate() {
                assert!(q.argmax(x).contains(&c));
            }
        }
    }

    #[test]
    fn tolerance_must_be_positive() {
        let m = counterexample_mdp(0.5);
        assert!(matches!(value_iteration(&m, 0.0), Err(Error::Argument(_))));
        let pi = StationaryPolicy::uniform(&m);
        assert!(matches!(
            policy_evaluation(&m, &pi, Evaluation::FixedPoint { tol: -1.0 }),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn brute_force_picks_pi_one() {
        let m = counterexample_mdp(0.75);
        let (v, pi) = brute_force_optimal(&m).unwrap();
        assert!((v.values[0] - 4.0).abs() < 1e-12);
        assert_eq!(pi.rows, vec![vec![0.0, 1.0]]);
    }

    #[test]
    fn enumeration_guard() {
        let n = 7; // 8^7 > 10^6
        let t = vec![vec![vec![1.0 / n as f64; n]; 8]; n];
        let r = vec![vec![vec![RewardDist::dirac(0.0); n]; 8]; n];
        let m = Mdp::from_tables(t, r, 0.5).unwrap();
        assert!(matches!(brute_force_optimal(&m), Err(Error::EnumerationTooLarge { .. })));
    }

    #[test]
    fn epsilon_greedy_cases() {
        let qf = QFunction::new(vec![vec![1.0, 1.0, 1.0], vec![0.0, 5.0]]);
        let pi = epsilon_greedy(&qf, &[0.3, 0.2]);
        for p in &pi.rows[0] {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((pi.rows[1][1] - 0.9).abs() < 1e-15);
        assert!((pi.rows[1][0] - 0.1).abs() < 1e-15);
        let greedy = epsilon_greedy(&qf, &[0.0, 0.0]);
        assert_eq!(greedy.rows[1], vec![0.0, 1.0]);
    }

    #[test]
    fn epsilon_greedy_rows_sum_to_one_exactly() {
        let qf = QFunction::new(vec![vec![q(1, 3), q(1, 3), q(0, 1)]]);
        let pi = epsilon_greedy(&qf, &[q(2, 7)]);
        let total = pi.rows[0].iter().fold(q(0, 1), |a, b| a + b.clone());
        assert_eq!(total, q(1, 1));
        assert_eq!(pi.rows[0][2], q(2, 21));
    }

    #[test]
    fn h_of_zero_and_q_star_is_q_star() {
        let m = counterexample_mdp(q(2, 5));
        let (v, _) = brute_force_optimal(&m).unwrap();
        let qs = q_from_v(&m, &v);
        assert_eq!(h_operator(&m, &[q(0, 1)], &qs).unwrap(), qs);
    }

    #[test]
    fn h_rejects_bad_epsilon() {
        let m = counterexample_mdp(0.4);
        let qf = QFunction::zeros(&m);
        assert!(h_operator(&m, &[1.5], &qf).is_err());
        assert!(h_operator(&m, &[0.5, 0.5], &qf).is_err());
    }
}
