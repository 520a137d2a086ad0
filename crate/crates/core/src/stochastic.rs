//! Stochastic-approximation rigs: the Robbins-Monro recursion, an abstract
//! contraction-driven scheme with its dominating auxiliary recursion, and a
//! sweep checking the contraction bound of the ε-greedy policy operator.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::random::RandomMdpSpec;
use crate::rng::{SeedSpec, Stream};
use crate::scalar::{Rational, Scalar};
use crate::solver::{epsilon_greedy, policy_iteration, policy_q};
use crate::tables::QFunction;

use num::bigint::BigInt;
use num::{Integer, One, Signed, Zero};

/// A step-size sequence k ↦ θ_k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepRule {
    /// 1 / (k + offset); offset ≥ 1.
    Harmonic { offset: u64 },
    /// 2^-(k+1): summable.
    Geometric,
    Constant { value: f64 },
}

impl StepRule {
    pub fn check(&self) -> Result<()> {
        match *self {
            StepRule::Harmonic { offset: 0 } => Err(Error::Argument("harmonic offset must be ≥ 1".into())),
            StepRule::Constant { value } if !(0.0..=1.0).contains(&value) => {
                Err(Error::Argument(format!("constant step {value} outside [0,1]")))
            }
            _ => Ok(()),
        }
    }

    pub fn at<S: Scalar>(&self, k: u64) -> S {
        match *self {
            StepRule::Harmonic { offset } => S::one() / S::from_u64(k + offset),
            StepRule::Geometric => pow(S::from_ratio(1, 2), k + 1),
            StepRule::Constant { value } => S::from_f64(value),
        }
    }

    /// Whether Σθ = ∞ and Σθ² < ∞, the standard conditions.
    pub fn satisfies_conditions(&self) -> bool {
        matches!(self, StepRule::Harmonic { .. })
    }

    /// Whether the sequence tends to zero.
    pub fn vanishes(&self) -> bool {
        !matches!(self, StepRule::Constant { value } if *value > 0.0)
    }
}

fn pow<S: Scalar>(mut base: S, mut e: u64) -> S {
    let mut acc = S::one();
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base.clone();
        }
        base = base.clone() * base;
        e >>= 1;
    }
    acc
}

/// Uniform law on a finite support; symmetric supports have mean zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteNoise {
    pub support: Vec<f64>,
}

impl FiniteNoise {
    pub fn zero() -> Self {
        Self { support: vec![0.0] }
    }

    /// Uniform on {-a, +a}.
    pub fn symmetric(a: f64) -> Self {
        Self { support: vec![-a, a] }
    }

    /// Support closed under negation and non-empty.
    pub fn is_symmetric(&self) -> bool {
        let mut s: Vec<f64> = self.support.clone();
        let mut neg: Vec<f64> = s.iter().map(|v| -v).collect();
        s.sort_by(f64::total_cmp);
        neg.sort_by(f64::total_cmp);
        !s.is_empty() && s.iter().zip(&neg).all(|(a, b)| a == b)
    }

    fn check(&self) -> Result<()> {
        if !self.is_symmetric() || self.support.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("noise support must be finite, non-empty and symmetric".into()));
        }
        Ok(())
    }

    fn draw<S: Scalar>(&self, rng: &mut Stream) -> S {
        S::from_f64(self.support[rng.below(self.support.len() as u64) as usize])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmConfig {
    pub theta: StepRule,
    pub noise: FiniteNoise,
    pub z0: f64,
    pub steps: u64,
    pub seed: u64,
}

/// Z_0 = z0, Z_{k+1} = (1 - θ_k) Z_k + θ_k ζ_{k+1}. Returns Z_0..=Z_steps.
pub fn robbins_monro(config: &RmConfig) -> Result<Vec<f64>> {
    config.theta.check()?;
    config.noise.check()?;
    let mut rng = SeedSpec::new(config.seed, 0, 0).stream();
    let mut z = config.z0;
    let mut out = Vec::with_capacity(config.steps as usize + 1);
    out.push(z);
    for k in 0..config.steps {
        let theta: f64 = config.theta.at(k);
        let zeta: f64 = config.noise.draw(&mut rng);
        z = (1.0 - theta) * z + theta * zeta;
        out.push(z);
    }
    Ok(out)
}

/// The map ℳ(η, f) of the abstract scheme.
#[derive(Debug, Clone)]
pub enum SyntheticMap<S: Scalar> {
    /// ℳ(η, f) = f*.
    ConstantTarget,
    /// ℳ(η, f) = f* - ρ ‖f* - f‖_∞.
    SupNormShrink,
    /// ℳ(η, f) = ℋ(ε, f) on the pairs of `mdp`, with ε(x) = max_a η(x,a);
    /// f* = Q*.
    PolicyOperator { mdp: Mdp<S> },
}

/// A contraction in the sense used by the abstract scheme: ℳ ≤ f* and
/// ‖f* - ℳ(η,f)‖ ≤ ρ‖f* - f‖ + β‖(f - f*)_+‖ + β‖η‖.
#[derive(Debug, Clone)]
pub struct SyntheticContraction<S: Scalar> {
    pub f_star: Vec<S>,
    pub rho: S,
    pub beta: S,
    pub map: SyntheticMap<S>,
}

impl<S: Scalar> SyntheticContraction<S> {
    pub fn constant_target(f_star: Vec<S>) -> Self {
        Self { f_star, rho: S::zero(), beta: S::zero(), map: SyntheticMap::ConstantTarget }
    }

    pub fn sup_norm_shrink(f_star: Vec<S>, rho: S) -> Result<Self> {
        if !(rho >= S::zero() && rho < S::one()) {
            return Err(Error::Argument("rho must lie in [0,1)".into()));
        }
        Ok(Self { f_star, rho, beta: S::zero(), map: SyntheticMap::SupNormShrink })
    }

    /// ρ = γ/(1-γ) (needs γ < 1/2), β = ρ · max(1, 2‖Q*‖).
    pub fn policy_operator(mdp: Mdp<S>) -> Result<Self> {
        let gamma = mdp.gamma().clone();
        let rho = gamma.clone() / (S::one() - gamma);
        if rho >= S::one() {
            return Err(Error::Argument("the policy operator contracts only for γ < 1/2".into()));
        }
        let (_, q_star, _) = policy_iteration(&mdp)?;
        let two_norm = S::from_u64(2) * q_star.sup_norm();
        let beta = rho.clone() * two_norm.max_of(S::one());
        let f_star = q_star.rows.into_iter().flatten().collect();
        Ok(Self { f_star, rho, beta, map: SyntheticMap::PolicyOperator { mdp } })
    }

    pub fn len(&self) -> usize {
        self.f_star.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f_star.is_empty()
    }

    pub fn apply(&self, eta: &[S], f: &[S]) -> Result<Vec<S>> {
        match &self.map {
            SyntheticMap::ConstantTarget => Ok(self.f_star.clone()),
            SyntheticMap::SupNormShrink => {
                let dist = sup_distance(&self.f_star, f);
                let shift = self.rho.clone() * dist;
                Ok(self.f_star.iter().map(|v| v.clone() - shift.clone()).collect())
            }
            SyntheticMap::PolicyOperator { mdp } => {
                let q = unflatten(mdp, f);
                let mut eps = vec![S::zero(); mdp.n_states()];
                let mut i = 0;
                for (x, e) in eps.iter_mut().enumerate() {
                    for _ in 0..mdp.n_actions(x) {
                        *e = e.clone().max_of(eta[i].clone());
                        i += 1;
                    }
                }
                let h = policy_q(mdp, &epsilon_greedy(&q, &eps))?;
                Ok(h.rows.into_iter().flatten().collect())
            }
        }
    }
}

fn unflatten<S: Scalar>(m: &Mdp<S>, f: &[S]) -> QFunction<S> {
    let mut rows = Vec::with_capacity(m.n_states());
    let mut i = 0;
    for x in 0..m.n_states() {
        rows.push(f[i..i + m.n_actions(x)].to_vec());
        i += m.n_actions(x);
    }
    QFunction::new(rows)
}

fn sup_distance<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |m, (x, y)| m.max_of((x.clone() - y.clone()).abs_val()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractSaConfig {
    pub lambda: StepRule,
    /// `None` means η ≡ 0.
    pub eta: Option<StepRule>,
    pub noise: FiniteNoise,
    pub steps: u64,
    pub seed: u64,
}

/// A hypothesis of the convergence result that the configured rules break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisFlag {
    /// Σλ = ∞ or Σλ² < ∞ fails.
    StepSizes,
    /// η does not tend to zero.
    EtaNotVanishing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbstractSaRun<S> {
    /// f̂_0..=f̂_steps.
    pub trajectory: Vec<Vec<S>>,
    /// W_0..=W_steps, W_0 = f̂_0 - f*.
    pub w: Vec<Vec<S>>,
    /// First (k, y) with f̂_k(y) - f*(y) > W_k(y).
    pub domination_failure: Option<(u64, usize)>,
    /// First (k, y) with ℳ(η_k, f̂_k)(y) > f*(y).
    pub map_above_target: Option<(u64, usize)>,
    pub flags: Vec<HypothesisFlag>,
}

impl<S: Scalar> AbstractSaRun<S> {
    pub fn final_error(&self, f_star: &[S]) -> f64 {
        sup_distance(self.trajectory.last().expect("non-empty"), f_star).to_f64()
    }
}

/// f̂_{k+1}(y) = f̂_k(y) + λ_k (ℳ(η_k, f̂_k)(y) - f̂_k(y) + ξ_{k+1}(y)), run
/// alongside W_{k+1} = (1 - λ_k) W_k + λ_k ξ_{k+1} with the same noise.
/// λ_k and η_k are the same for every y. Rules breaking the convergence
/// hypotheses are run anyway and flagged.
pub fn abstract_sa<S: Scalar>(
    synth: &SyntheticContraction<S>,
    config: &AbstractSaConfig,
    f0: &[S],
) -> Result<AbstractSaRun<S>> {
    config.lambda.check()?;
    if let Some(eta) = &config.eta {
        eta.check()?;
    }
    config.noise.check()?;
    if f0.len() != synth.len() {
        return Err(Error::Argument("f0 length differs from the target".into()));
    }
    let mut flags = Vec::new();
    if !config.lambda.satisfies_conditions() {
        flags.push(HypothesisFlag::StepSizes);
    }
    if config.eta.is_some_and(|e| !e.vanishes()) {
        flags.push(HypothesisFlag::EtaNotVanishing);
    }

    let mut rng = SeedSpec::new(config.seed, 0, 0).stream();
    let n = synth.len();
    let mut f = f0.to_vec();
    let mut w: Vec<S> = f.iter().zip(&synth.f_star).map(|(a, b)| a.clone() - b.clone()).collect();
    let mut trajectory = vec![f.clone()];
    let mut ws = vec![w.clone()];
    let mut domination_failure = None;
    let mut map_above_target = None;

    for k in 0..config.steps {
        let lambda: S = config.lambda.at(k);
        let eta: S = config.eta.map_or(S::zero(), |e| e.at(k));
        let m = synth.apply(&vec![eta; n], &f)?;
        if map_above_target.is_none() {
            if let Some(y) = (0..n).find(|&y| m[y] > synth.f_star[y]) {
                map_above_target = Some((k, y));
            }
        }
        let xi: Vec<S> = (0..n).map(|_| config.noise.draw(&mut rng)).collect();
        for y in 0..n {
            let step = m[y].clone() - f[y].clone() + xi[y].clone();
            f[y] = f[y].clone() + lambda.clone() * step;
            w[y] = (S::one() - lambda.clone()) * w[y].clone() + lambda.clone() * xi[y].clone();
        }
        if domination_failure.is_none() {
            if let Some(y) = (0..n).find(|&y| f[y].clone() - synth.f_star[y].clone() > w[y]) {
                domination_failure = Some((k + 1, y));
            }
        }
        trajectory.push(f.clone());
        ws.push(w.clone());
    }
    Ok(AbstractSaRun { trajectory, w: ws, domination_failure, map_above_target, flags })
}

/// Result of [`abstract_sa_exact`]; values are exact during the run and
/// converted to f64 only for the returned trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSaRun {
    /// f̂_0..=f̂_steps, rounded.
    pub trajectory: Vec<Vec<f64>>,
    pub domination_failure: Option<(u64, usize)>,
    pub map_above_target: Option<(u64, usize)>,
    pub flags: Vec<HypothesisFlag>,
    /// Bit length of the shared denominator at the end.
    pub scale_bits: u64,
}

/// Marks the entries that attain their state's maximum.
fn maximal_indicator(m: &Mdp<Rational>, f: &[BigInt]) -> Vec<bool> {
    let mut out = Vec::with_capacity(f.len());
    let mut i = 0;
    for x in 0..m.n_states() {
        let row = &f[i..i + m.n_actions(x)];
        let top = row.iter().max().expect("every state has an action");
        out.extend(row.iter().map(|v| v == top));
        i += row.len();
    }
    out
}

fn lcm_of_denominators<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values.into_iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

fn scaled(v: &Rational, den: &BigInt) -> BigInt {
    v.numer() * (den / v.denom())
}

/// Drops common factors of two from the shared scale and all numerators.
fn strip_twos(s: &mut BigInt, vectors: [&mut Vec<BigInt>; 2]) {
    let mut tz = s.trailing_zeros().unwrap_or(0);
    for v in vectors.iter() {
        for x in v.iter() {
            if let Some(t) = x.trailing_zeros() {
                tz = tz.min(t);
            }
        }
    }
    if tz > 0 {
        *s >>= tz;
        for v in vectors {
            for x in v.iter_mut() {
                *x >>= tz;
            }
        }
    }
}

/// Divides the shared scale and all numerators by their common factor with
/// `hint`. Only remainders modulo the small hint are taken, so the cost is
/// linear in the operand size.
fn cancel_common(hint: &BigInt, s: &mut BigInt, vectors: [&mut Vec<BigInt>; 2]) {
    let mut g = hint.abs().gcd(&(&*s % hint));
    for v in vectors.iter() {
        for x in v.iter() {
            if g.is_one() {
                return;
            }
            g = g.gcd(&(x % &g));
        }
    }
    if g > BigInt::one() {
        *s /= &g;
        for v in vectors {
            for x in v.iter_mut() {
                *x /= &g;
            }
        }
    }
}

/// [`abstract_sa`] in exact rational arithmetic, fast enough for long runs.
///
/// f̂_k and W_k are kept as integer vectors over one shared positive scale
/// `s`, so each step is a handful of integer products plus a cancellation
/// against small factors; no gcd of two large operands is ever taken. Domination `f̂_k - f* ≤ W_k` and `ℳ ≤ f*` are checked exactly at
/// every step.
pub fn abstract_sa_exact(
    synth: &SyntheticContraction<Rational>,
    config: &AbstractSaConfig,
    f0: &[Rational],
) -> Result<ExactSaRun> {
    config.lambda.check()?;
    if let Some(eta) = &config.eta {
        eta.check()?;
    }
    config.noise.check()?;
    let n = synth.len();
    if f0.len() != n {
        return Err(Error::Argument("f0 length differs from the target".into()));
    }
    let mut flags = Vec::new();
    if !config.lambda.satisfies_conditions() {
        flags.push(HypothesisFlag::StepSizes);
    }
    if config.eta.is_some_and(|e| !e.vanishes()) {
        flags.push(HypothesisFlag::EtaNotVanishing);
    }

    // f* = a / d
    let d = lcm_of_denominators(&synth.f_star);
    let a: Vec<BigInt> = synth.f_star.iter().map(|v| scaled(v, &d)).collect();
    let support: Vec<Rational> = config.noise.support.iter().map(|&v| Rational::from_f64(v)).collect();
    let xi_den = lcm_of_denominators(&support);

    let mut s = lcm_of_denominators(f0).lcm(&d);
    let mut f: Vec<BigInt> = f0.iter().map(|v| scaled(v, &s)).collect();
    let mut w: Vec<BigInt> = (0..n).map(|y| &f[y] - &a[y] * (&s / &d)).collect();
    let to_f64 = |num: &[BigInt], s: &BigInt| -> Vec<f64> {
        num.iter().map(|x| crate::scalar::rational_to_f64(&Rational::new_raw(x.clone(), s.clone()))).collect()
    };
    let mut trajectory = vec![to_f64(&f, &s)];
    let mut domination_failure = None;
    let mut map_above_target = None;
    let mut rng = SeedSpec::new(config.seed, 0, 0).stream();
    let mut policy_cache: HashMap<(Rational, Vec<bool>), (Vec<BigInt>, BigInt)> = HashMap::new();

    for k in 0..config.steps {
        let lambda: Rational = config.lambda.at(k);
        let eta: Rational = config.eta.map_or(Rational::zero(), |e| e.at(k));
        let (p, q) = (lambda.numer().clone(), lambda.denom().clone());

        // ℳ(η, f̂) = m / (c s)
        let (m, c): (Vec<BigInt>, BigInt) = match &synth.map {
            SyntheticMap::ConstantTarget => (a.iter().map(|x| x * &s).collect(), d.clone()),
            SyntheticMap::SupNormShrink => {
                let (rn, rd) = (synth.rho.numer(), synth.rho.denom());
                let dist = (0..n).map(|y| (&a[y] * &s - &f[y] * &d).abs()).max().unwrap_or_default();
                let shift = rn * dist;
                (a.iter().map(|x| rd * x * &s - &shift).collect(), rd * &d)
            }
            SyntheticMap::PolicyOperator { mdp } => {
                // the output depends on f only through its per-state maximal
                // sets, so evaluate on a 0/1 indicator and cache by that key
                let key = (eta.clone(), maximal_indicator(mdp, &f));
                if !policy_cache.contains_key(&key) {
                    let proxy: Vec<Rational> = key.1.iter().map(|&b| Rational::from_u64(b as u64)).collect();
                    let h = synth.apply(&vec![eta.clone(); n], &proxy)?;
                    let hd = lcm_of_denominators(&h);
                    let nums = h.iter().map(|v| scaled(v, &hd)).collect();
                    policy_cache.insert(key.clone(), (nums, hd));
                }
                let (nums, hd) = &policy_cache[&key];
                (nums.iter().map(|v| v * &s).collect(), hd.clone())
            }
        };
        if map_above_target.is_none() {
            if let Some(y) = (0..n).find(|&y| &m[y] * &d > &a[y] * &c * &s) {
                map_above_target = Some((k, y));
            }
        }

        let xi: Vec<BigInt> = (0..n)
            .map(|_| scaled(&support[rng.below(support.len() as u64) as usize], &xi_den))
            .collect();
        let keep = (&q - &p) * &c * &xi_den;
        let noise_scale = &p * &c * &s;
        for y in 0..n {
            let noise = &xi[y] * &noise_scale;
            f[y] = &keep * &f[y] + &p * &m[y] * &xi_den + &noise;
            w[y] = &keep * &w[y] + noise;
        }
        s = &q * &c * &xi_den * &s;
        strip_twos(&mut s, [&mut f, &mut w]);
        cancel_common(&(&q * &c), &mut s, [&mut f, &mut w]);

        if domination_failure.is_none() {
            // f/s - a/d > w/s, over the common denominator s d
            if let Some(y) = (0..n).find(|&y| &f[y] * &d - &a[y] * &s > &w[y] * &d) {
                domination_failure = Some((k + 1, y));
            }
        }
        trajectory.push(to_f64(&f, &s));
    }
    Ok(ExactSaRun { trajectory, domination_failure, map_above_target, flags, scale_bits: s.bits() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCase {
    pub index: usize,
    pub gamma: f64,
    pub mdp_seed: u64,
    /// ‖ℋ(ε,q) - Q*‖_∞
    pub lhs: f64,
    /// γ/(1-γ)(‖Q* - q‖ + ‖(q - Q*)_+‖ + 2‖Q*‖‖ε‖)
    pub rhs: f64,
    /// max(lhs - rhs, 0), exact before conversion.
    pub norm_violation: f64,
    /// max(ℋ - Q*)_+, exact before conversion.
    pub dominance_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub cases: Vec<SweepCase>,
    pub max_norm_violation: f64,
    pub max_dominance_violation: f64,
}

/// Draws a rational in [-1, 1] with denominator 2^10.
fn box_offset(rng: &mut Stream) -> Rational {
    Rational::from_ratio(rng.below(2049) as i64 - 1024, 1024)
}

/// Checks ℋ(ε,q) ≤ Q* and the γ/(1-γ) norm bound on `count` random tuples
/// per discount factor, in exact arithmetic. Each tuple: a random MDP
/// (≤ 5 states, ≤ 4 actions), q = Q* + offsets in [-2, 2], ε(x) ∈ [0, 1].
pub fn contraction_sweep(seed: u64, count: usize, gammas: &[f64]) -> Result<SweepReport> {
    if count == 0 {
        return Err(Error::Argument("count must be ≥ 1".into()));
    }
    let mut rng = SeedSpec::new(seed, 0, 0).stream();
    let mut cases = Vec::with_capacity(count * gammas.len());
    for &gamma in gammas {
        for _ in 0..count {
            let mdp_seed = rng.below(u64::MAX);
            let spec = RandomMdpSpec {
                n_states: 1 + rng.below(5) as usize,
                max_actions: 1 + rng.below(4) as usize,
                min_actions: 1,
                gamma,
                branching: 1 + rng.below(3) as usize,
                reward_range: (-2, 2),
                reward_points: 1 + rng.below(2) as usize,
                absorbing_fraction: 0.0,
                acyclic: false,
                seed: mdp_seed,
            };
            let m: Mdp<Rational> = spec.generate()?;
            let (_, q_star, _) = policy_iteration(&m)?;
            let scale = Rational::from_u64(2);
            let q = QFunction::new(
                q_star
                    .rows
                    .iter()
                    .map(|row| row.iter().map(|v| v.clone() + scale.clone() * box_offset(&mut rng)).collect())
                    .collect(),
            );
            let eps: Vec<Rational> = (0..m.n_states())
                .map(|_| match rng.below(4) {
                    0 => Rational::from_u64(0),
                    _ => Rational::from_ratio(rng.below(1025) as i64, 1024),
                })
                .collect();
            let case = sweep_case(&m, &q_star, &q, &eps)?;
            cases.push(SweepCase { index: cases.len(), gamma, mdp_seed, ..case });
        }
    }
    let max_norm_violation = cases.iter().map(|c| c.norm_violation).fold(0.0, f64::max);
    let max_dominance_violation = cases.iter().map(|c| c.dominance_violation).fold(0.0, f64::max);
    Ok(SweepReport { cases, max_norm_violation, max_dominance_violation })
}

/// Both sides of the bound for one tuple.
pub fn sweep_case(
    m: &Mdp<Rational>,
    q_star: &QFunction<Rational>,
    q: &QFunction<Rational>,
    eps: &[Rational],
) -> Result<SweepCase> {
    let h = policy_q(m, &epsilon_greedy(q, eps))?;
    let gamma = m.gamma().clone();
    let factor = gamma.clone() / (Rational::from_u64(1) - gamma.clone());
    let eps_norm = eps.iter().fold(Rational::from_u64(0), |acc, e| acc.max_of(e.clone()));
    let lhs = h.sup_distance(q_star);
    let rhs = factor
        * (q_star.sup_distance(q)
            + q.positive_part_sup(q_star)
            + Rational::from_u64(2) * q_star.sup_norm() * eps_norm);
    let zero = Rational::from_u64(0);
    let norm_violation = (lhs.clone() - rhs.clone()).max_of(zero.clone());
    let dominance_violation = h.positive_part_sup(q_star).max_of(zero);
    Ok(SweepCase {
        index: 0,
        gamma: gamma.to_f64(),
        mdp_seed: 0,
        lhs: lhs.to_f64(),
        rhs: rhs.to_f64(),
        norm_violation: norm_violation.to_f64(),
        dominance_violation: dominance_violation.to_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::counterexample_mdp;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn noiseless_harmonic_hits_zero() {
        let cfg = RmConfig {
            theta: StepRule::Harmonic { offset: 1 },
            noise: FiniteNoise::zero(),
            z0: 1.0,
            steps: 10,
            seed: 0,
        };
        let z = robbins_monro(&cfg).unwrap();
        assert_eq!(z[0], 1.0);
        assert!(z[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_step_keeps_z0() {
        let cfg = RmConfig {
            theta: StepRule::Constant { value: 0.0 },
            noise: FiniteNoise::symmetric(1.0),
            z0: 3.5,
            steps: 50,
            seed: 1,
        };
        assert!(robbins_monro(&cfg).unwrap().iter().all(|&v| v == 3.5));
    }

    #[test]
    fn noiseless_mean_map_is_a_product() {
        let cfg = RmConfig {
            theta: StepRule::Geometric,
            noise: FiniteNoise::zero(),
            z0: 1.0,
            steps: 60,
            seed: 0,
        };
        let z = robbins_monro(&cfg).unwrap();
        let mut p = 1.0;
        for k in 0..60u64 {
            p *= 1.0 - 0.5f64.powi(k as i32 + 1);
            assert!((z[k as usize + 1] - p).abs() < 1e-15);
        }
        // Π (1 - 2^-j) ≈ 0.288788
        assert!((z[60] - 0.288_788_095).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_rules() {
        assert!(StepRule::Harmonic { offset: 0 }.check().is_err());
        assert!(StepRule::Constant { value: 1.5 }.check().is_err());
        assert!(!FiniteNoise { support: vec![1.0, 2.0] }.is_symmetric());
        assert!(FiniteNoise { support: vec![-1.0, 0.0, 1.0] }.is_symmetric());
    }

    #[test]
    fn constant_target_halves_the_error() {
        let synth = SyntheticContraction::constant_target(vec![r(1, 1), r(-2, 1)]);
        let cfg = AbstractSaConfig {
            lambda: StepRule::Constant { value: 0.5 },
            eta: None,
            noise: FiniteNoise::zero(),
            steps: 8,
            seed: 0,
        };
        let run = abstract_sa(&synth, &cfg, &[r(9, 1), r(6, 1)]).unwrap();
        for k in 0..8 {
            let e0 = sup_distance(&run.trajectory[k], &synth.f_star);
            let e1 = sup_distance(&run.trajectory[k + 1], &synth.f_star);
            assert_eq!(e1 * r(2, 1), e0);
        }
        assert_eq!(run.flags, vec![HypothesisFlag::StepSizes]);
    }

    #[test]
    fn fixed_point_stays_put() {
        let synth = SyntheticContraction::sup_norm_shrink(vec![r(1, 2), r(3, 1)], r(1, 2)).unwrap();
        let cfg = AbstractSaConfig {
            lambda: StepRule::Harmonic { offset: 1 },
            eta: None,
            noise: FiniteNoise::zero(),
            steps: 20,
            seed: 0,
        };
        let run = abstract_sa(&synth, &cfg, &synth.f_star.clone()).unwrap();
        assert!(run.trajectory.iter().all(|f| *f == synth.f_star));
        assert!(run.flags.is_empty());
    }

    #[test]
    fn domination_holds_exactly_on_short_runs() {
        let m = crate::random::RandomMdpSpec { gamma: 0.25, seed: 3, ..Default::default() }
            .generate::<Rational>()
            .unwrap();
        let maps = vec![
            SyntheticContraction::constant_target(vec![r(1, 1), r(0, 1), r(-1, 3)]),
            SyntheticContraction::sup_norm_shrink(vec![r(1, 1), r(0, 1), r(-1, 3)], r(1, 2)).unwrap(),
            SyntheticContraction::policy_operator(m).unwrap(),
        ];
        for synth in maps {
            let f0: Vec<Rational> = (0..synth.len()).map(|i| r(i as i64 - 1, 1)).collect();
            let cfg = AbstractSaConfig {
                lambda: StepRule::Harmonic { offset: 1 },
                eta: Some(StepRule::Harmonic { offset: 1 }),
                noise: FiniteNoise::symmetric(0.125),
                steps: 200,
                seed: 4,
            };
            let run = abstract_sa(&synth, &cfg, &f0).unwrap();
            assert_eq!(run.domination_failure, None);
            assert_eq!(run.map_above_target, None);
            let exact = abstract_sa_exact(&synth, &cfg, &f0).unwrap();
            assert_eq!(exact.domination_failure, None);
            assert_eq!(exact.map_above_target, None);
            for (a, b) in run.trajectory.iter().zip(&exact.trajectory) {
                for (x, y) in a.iter().zip(b) {
                    assert!((x.to_f64() - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn exact_engine_detects_a_map_above_target() {
        // f* - ρ‖f* - f‖ with negative ρ is not a valid member; force it
        let mut synth = SyntheticContraction::sup_norm_shrink(vec![r(0, 1), r(1, 1)], r(1, 2)).unwrap();
        synth.rho = r(-1, 2);
        let cfg = AbstractSaConfig {
            lambda: StepRule::Harmonic { offset: 1 },
            eta: None,
            noise: FiniteNoise::zero(),
            steps: 5,
            seed: 0,
        };
        let run = abstract_sa_exact(&synth, &cfg, &[r(2, 1), r(2, 1)]).unwrap();
        assert_eq!(run.map_above_target, Some((0, 0)));
        assert!(run.domination_failure.is_some());
    }

    #[test]
    fn single_action_sweep_has_zero_lhs() {
        let m = crate::random::RandomMdpSpec { max_actions: 1, seed: 2, ..Default::default() }
            .generate::<Rational>()
            .unwrap();
        let (_, q_star, _) = policy_iteration(&m).unwrap();
        let q = QFunction::new(q_star.rows.iter().map(|row| row.iter().map(|v| v.clone() + r(1, 3)).collect()).collect());
        let case = sweep_case(&m, &q_star, &q, &vec![r(1, 2); m.n_states()]).unwrap();
        assert_eq!(case.lhs, 0.0);
    }

    #[test]
    fn sweep_at_optimum_is_tight() {
        let m = counterexample_mdp(r(2, 5));
        let (_, q_star, _) = policy_iteration(&m).unwrap();
        let case = sweep_case(&m, &q_star, &q_star, &[r(0, 1)]).unwrap();
        assert_eq!((case.lhs, case.rhs), (0.0, 0.0));
        let report = contraction_sweep(9, 10, &[0.1, 0.4]).unwrap();
        assert_eq!(report.cases.len(), 20);
        assert_eq!(report.max_norm_violation, 0.0);
        assert_eq!(report.max_dominance_violation, 0.0);
    }
}
