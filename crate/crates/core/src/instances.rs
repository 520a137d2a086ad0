//! Small hand-built MDPs used by tests, examples and the CLI.

use crate::mdp::{Mdp, MdpParts, RewardDist};
use crate::scalar::Scalar;

/// One state `e`, actions `0` and `1`, both looping on `e`; action 0 pays
/// 0 and action 1 pays 1, deterministically.
pub fn counterexample_mdp<S: Scalar>(gamma: S) -> Mdp<S> {
    Mdp::new(MdpParts {
        states: vec!["e".into()],
        actions: vec![vec!["0".into(), "1".into()]],
        transitions: vec![vec![vec![S::one()], vec![S::one()]]],
        rewards: vec![vec![
            vec![RewardDist::dirac(S::zero())],
            vec![RewardDist::dirac(S::one())],
        ]],
        gamma,
        triangle: None,
    })
    .expect("counter-example MDP is valid")
}

/// States `x -> y -> t` with `t` absorbing (declared as the triangle).
/// `x` has two actions, `y` has two, `t` has one.
pub fn three_state_chain<S: Scalar>(gamma: S) -> Mdp<S> {
    let r = |n: i64, d: i64| S::from_ratio(n, d);
    let dirac = |v: i64| RewardDist::dirac(S::from_ratio(v, 1));
    let zero = || RewardDist::dirac(S::zero());
    let coin = RewardDist::new(vec![(r(0, 1), r(1, 2)), (r(2, 1), r(1, 2))]).expect("valid");
    Mdp::new(MdpParts {
        states: vec!["x".into(), "y".into(), "t".into()],
        actions: vec![
            vec!["stay".into(), "go".into()],
            vec!["stay".into(), "go".into()],
            vec!["rest".into()],
        ],
        transitions: vec![
            vec![vec![r(1, 2), r(1, 2), r(0, 1)], vec![r(0, 1), r(1, 1), r(0, 1)]],
            vec![vec![r(1, 3), r(2, 3), r(0, 1)], vec![r(0, 1), r(1, 4), r(3, 4)]],
            vec![vec![r(0, 1), r(0, 1), r(1, 1)]],
        ],
        rewards: vec![
            vec![vec![dirac(1), dirac(1), zero()], vec![zero(), coin.clone(), zero()]],
            vec![vec![dirac(2), dirac(2), zero()], vec![zero(), dirac(-1), dirac(3)]],
            vec![vec![zero(), zero(), zero()]],
        ],
        gamma,
        triangle: Some(vec![2]),
    })
    .expect("chain MDP is valid")
}
