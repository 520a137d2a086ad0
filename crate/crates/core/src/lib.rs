//! Tabular MDP laboratory: exact solvers, first-visit Monte-Carlo control,
//! stochastic-approximation rigs and an exact reproduction of a divergent
//! Monte-Carlo control run.
//!
//! Everything numeric is generic over [`Scalar`], with `f64` and
//! [`Rational`] backends.

pub mod control;
pub mod counterexample;
pub mod episode;
pub mod error;
pub mod instances;
pub mod linalg;
pub mod mdp;
pub mod quadratic;
pub mod random;
pub mod rng;
pub mod scalar;
pub mod solver;
pub mod stochastic;
pub mod tables;

pub use error::{Error, Result};
pub use mdp::{Mdp, MdpDocument, MdpParts, RewardDist, ValidationReport};
pub use rng::SeedSpec;
pub use scalar::{Rational, Scalar};
pub use tables::{QFunction, StationaryPolicy, ValueFunction};
