//! Monte-Carlo control: the general stochastic-approximation scheme, the
//! first-visit algorithm with infinite episodes, and its finite-episode form
//! under an absorbing set.

use serde::{Deserialize, Serialize};

use crate::episode::{
    first_visits, horizon_for_tolerance, returns, sample_episode, AbsorbingSpec, Episode,
    EpisodeMode, StartDist, ValidatedAbsorbing,
};
use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::rng::SeedSpec;
use crate::scalar::Scalar;
use crate::solver::{epsilon_greedy, policy_evaluation, value_iteration, Evaluation};
use crate::tables::{QFunction, StationaryPolicy, ValueFunction};

/// Tolerance used for the reference V* / Q* in run metrics. The CLI's
/// `solve` uses the same value so emitted artifacts agree.
pub const SOLVE_TOL: f64 = 1e-12;

/// Default metric stride.
pub const DEFAULT_STRIDE: u64 = 100;

/// Return-truncation tolerance factor: episodes are long enough that each
/// first-visit return is within `1e-9 (1 - γ)` of its infinite sum.
pub const RETURN_TOL_FACTOR: f64 = 1e-9;

/// What a schedule rule may look at: the state after `k` episodes.
pub struct ScheduleContext<'a, S> {
    pub k: u64,
    pub q: &'a QFunction<S>,
    pub audit: &'a ScheduleAudit<S>,
}

/// A first visit in the episode being processed. Rules must only inspect
/// the episode up to `tau` (see [`FirstVisit::prefix_states`]).
pub struct FirstVisit<'a, S> {
    pub state: usize,
    pub action: usize,
    pub tau: usize,
    episode: &'a Episode<S>,
}

impl<'a, S: Scalar> FirstVisit<'a, S> {
    /// States, actions and rewards observed up to and including time τ.
    pub fn prefix_states(&self) -> (&'a [usize], &'a [usize], &'a [S]) {
        (
            &self.episode.states[..=self.tau],
            &self.episode.actions[..=self.tau],
            &self.episode.rewards[..self.tau],
        )
    }
}

/// ε_k, ν_k and α_k of the general algorithm.
pub trait Schedules<S: Scalar> {
    fn epsilon(&self, ctx: &ScheduleContext<'_, S>) -> Vec<S>;
    /// Start law of the next episode; `policy` is π̂^k.
    fn start(&self, ctx: &ScheduleContext<'_, S>, policy: &StationaryPolicy<S>) -> StartDist<S>;
    fn alpha(&self, ctx: &ScheduleContext<'_, S>, visit: &FirstVisit<'_, S>) -> S;
}

/// Fixed ε, fixed α, fixed start law.
#[derive(Debug, Clone)]
pub struct ConstantSchedules<S> {
    pub epsilon: S,
    pub alpha: S,
    pub start: StartDist<S>,
}

impl<S: Scalar> Schedules<S> for ConstantSchedules<S> {
    fn epsilon(&self, ctx: &ScheduleContext<'_, S>) -> Vec<S> {
        vec![self.epsilon.clone(); ctx.q.rows.len()]
    }

    fn start(&self, _: &ScheduleContext<'_, S>, _: &StationaryPolicy<S>) -> StartDist<S> {
        self.start.clone()
    }

    fn alpha(&self, _: &ScheduleContext<'_, S>, _: &FirstVisit<'_, S>) -> S {
        self.alpha.clone()
    }
}

/// ε_k(x) = (1 + N_k(x))^-θ and α_k(x,a) = N_{k+1}(x,a)^-κ. With κ = 1 and
/// a state start law this is exactly the first-visit algorithm.
#[derive(Debug, Clone)]
pub struct VisitCountSchedules<S> {
    pub theta: f64,
    pub alpha_exponent: f64,
    /// `States(μ_0)` gives ν_k = μ_0 ⊗ π̂^k.
    pub start: StartDist<S>,
}

impl<S: Scalar> Schedules<S> for VisitCountSchedules<S> {
    fn epsilon(&self, ctx: &ScheduleContext<'_, S>) -> Vec<S> {
        visit_epsilon(&ctx.audit.state_visits, self.theta)
    }

    fn start(&self, _: &ScheduleContext<'_, S>, _: &StationaryPolicy<S>) -> StartDist<S> {
        self.start.clone()
    }

    fn alpha(&self, ctx: &ScheduleContext<'_, S>, visit: &FirstVisit<'_, S>) -> S {
        let n = ctx.audit.pair_visits[visit.state][visit.action];
        S::inverse_power(n, self.alpha_exponent)
    }
}

fn visit_epsilon<S: Scalar>(state_visits: &[u64], theta: f64) -> Vec<S> {
    state_visits.iter().map(|&n| S::inverse_power(n, theta)).collect()
}

/// Per-pair bookkeeping of visits and step sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleAudit<S> {
    /// N_k(x,a)
    pub pair_visits: Vec<Vec<u64>>,
    /// N_k(x) = Σ_a N_k(x,a)
    pub state_visits: Vec<u64>,
    /// Σ α_k(x,a) 1{τ < ∞}
    pub alpha_sum: Vec<Vec<S>>,
    /// Σ α_k(x,a)² 1{τ < ∞}
    pub alpha_sq_sum: Vec<Vec<S>>,
    /// Episode number (1-based) of the latest visit.
    pub last_visit: Vec<Vec<Option<u64>>>,
}

impl<S: Scalar> ScheduleAudit<S> {
    pub fn new<T: Scalar>(m: &Mdp<T>) -> Self {
        let zeros = || -> Vec<Vec<S>> { (0..m.n_states()).map(|x| vec![S::zero(); m.n_actions(x)]).collect() };
        Self {
            pair_visits: (0..m.n_states()).map(|x| vec![0; m.n_actions(x)]).collect(),
            state_visits: vec![0; m.n_states()],
            alpha_sum: zeros(),
            alpha_sq_sum: zeros(),
            last_visit: (0..m.n_states()).map(|x| vec![None; m.n_actions(x)]).collect(),
        }
    }

    fn record(&mut self, x: usize, a: usize, alpha: &S, episode: u64) {
        self.pair_visits[x][a] += 1;
        self.state_visits[x] += 1;
        self.alpha_sum[x][a] = self.alpha_sum[x][a].clone() + alpha.clone();
        self.alpha_sq_sum[x][a] = self.alpha_sq_sum[x][a].clone() + alpha.clone() * alpha.clone();
        self.last_visit[x][a] = Some(episode);
    }
}

/// State of the general algorithm after `k` episodes.
#[derive(Debug, Clone)]
pub struct GeneralState<S, Sch> {
    pub q: QFunction<S>,
    pub k: u64,
    pub schedules: Sch,
    pub audit: ScheduleAudit<S>,
}

impl<S: Scalar, Sch: Schedules<S>> GeneralState<S, Sch> {
    /// Starts from Q̂^0 ≡ 0.
    pub fn new<T: Scalar>(m: &Mdp<T>, schedules: Sch) -> Self {
        Self::with_q(m, QFunction::zeros(m), schedules)
    }

    pub fn with_q<T: Scalar>(m: &Mdp<T>, q: QFunction<S>, schedules: Sch) -> Self {
        Self { q, k: 0, schedules, audit: ScheduleAudit::new(m) }
    }

    fn context(&self) -> ScheduleContext<'_, S> {
        ScheduleContext { k: self.k, q: &self.q, audit: &self.audit }
    }

    pub fn epsilon(&self) -> Vec<S> {
        self.schedules.epsilon(&self.context())
    }

    /// π̂^k.
    pub fn policy(&self) -> StationaryPolicy<S> {
        epsilon_greedy(&self.q, &self.epsilon())
    }
}

fn check_unit<S: Scalar>(values: &[S], what: &str) -> Result<()> {
    if values.iter().any(|v| *v < S::zero() || *v > S::one()) {
        return Err(Error::Contract(format!("{what} outside [0,1]")));
    }
    Ok(())
}

/// One episode of the general algorithm.
///
/// Builds π̂^k from Q̂^k and ε_k, samples an episode from ν_k, and for every
/// pair with a finite first-visit time sets
/// Q̂^{k+1} = (1 - α_k) Q̂^k + α_k G. Unvisited pairs keep their value.
pub fn general_step<S: Scalar, Sch: Schedules<S>>(
    mut state: GeneralState<S, Sch>,
    m: &Mdp<S>,
    seed: SeedSpec,
    mode: EpisodeMode<'_>,
) -> Result<GeneralState<S, Sch>> {
    let ctx = state.context();
    let eps = state.schedules.epsilon(&ctx);
    if eps.len() != m.n_states() {
        return Err(Error::Contract("ε schedule returned the wrong length".into()));
    }
    check_unit(&eps, "ε")?;
    let pi = epsilon_greedy(&state.q, &eps);
    let start = state.schedules.start(&ctx, &pi);
    start.check(m)?;
    let episode = sample_episode(m, &pi, &start, seed, mode)?;
    let g = returns(&episode, m.gamma());
    let tau = first_visits(&episode, m);

    let mut updates = Vec::new();
    for (x, row) in tau.iter().enumerate() {
        for (a, t) in row.iter().enumerate() {
            let Some(t) = *t else { continue };
            let visit = FirstVisit { state: x, action: a, tau: t, episode: &episode };
            let alpha = state.schedules.alpha(&ctx, &visit);
            check_unit(std::slice::from_ref(&alpha), "α")?;
            updates.push((x, a, t, alpha));
        }
    }
    let episode_no = state.k + 1;
    for (x, a, t, alpha) in updates {
        let old = state.q.get(x, a).clone();
        let new = (S::one() - alpha.clone()) * old + alpha.clone() * g[t].clone();
        state.q.set(x, a, new);
        state.audit.record(x, a, &alpha, episode_no);
    }
    state.k += 1;
    Ok(state)
}

/// State of the first-visit algorithm after `k` episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FvaState<S> {
    /// Q̄^k
    pub q: QFunction<S>,
    /// Σ_i 1{τ^i < ∞} G^i per pair.
    pub sum_returns: QFunction<S>,
    /// Visit counts and the implied step sizes α = 1/N_{k+1}.
    pub audit: ScheduleAudit<S>,
    pub k: u64,
    pub theta: f64,
}

impl<S: Scalar> FvaState<S> {
    pub fn new<T: Scalar>(m: &Mdp<T>, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::Argument(format!("theta {theta} outside (0,1]")));
        }
        Ok(Self {
            q: QFunction::zeros(m),
            sum_returns: QFunction::zeros(m),
            audit: ScheduleAudit::new(m),
            k: 0,
            theta,
        })
    }

    pub fn n_pairs(&self) -> &[Vec<u64>] {
        &self.audit.pair_visits
    }

    pub fn n_states(&self) -> &[u64] {
        &self.audit.state_visits
    }

    /// ε_k(x) = (1 + N_k(x))^-θ.
    pub fn epsilon(&self) -> Vec<S> {
        visit_epsilon(&self.audit.state_visits, self.theta)
    }

    /// π̄^k.
    pub fn policy(&self) -> StationaryPolicy<S> {
        epsilon_greedy(&self.q, &self.epsilon())
    }
}

/// One episode of the first-visit algorithm, following the pseudo-code:
/// running-mean update `Q = (n Q + G) / (n + 1)`, then `n(x,a) += 1` and
/// `N(x) += 1` for every first-visited pair.
///
/// With `EpisodeMode::Absorbed { extension: 0, .. }` this is the
/// finite-episode algorithm (first visits searched over `[0, T_△]`).
pub fn fva_step<S: Scalar>(
    mut state: FvaState<S>,
    m: &Mdp<S>,
    mu0: &[S],
    seed: SeedSpec,
    mode: EpisodeMode<'_>,
) -> Result<FvaState<S>> {
    let pi = state.policy();
    let start = StartDist::States(mu0.to_vec());
    start.check(m)?;
    let episode = sample_episode(m, &pi, &start, seed, mode)?;
    let g = returns(&episode, m.gamma());
    let tau = first_visits(&episode, m);
    let episode_no = state.k + 1;
    for (x, row) in tau.iter().enumerate() {
        for (a, t) in row.iter().enumerate() {
            let Some(t) = *t else { continue };
            let n = state.audit.pair_visits[x][a];
            let n_s = S::from_u64(n);
            let n_next = S::from_u64(n + 1);
            let updated = (n_s * state.q.get(x, a).clone() + g[t].clone()) / n_next.clone();
            state.q.set(x, a, updated);
            let sum = state.sum_returns.get(x, a).clone() + g[t].clone();
            state.sum_returns.set(x, a, sum);
            state.audit.record(x, a, &(S::one() / n_next), episode_no);
        }
    }
    state.k += 1;
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    General,
    Fva,
    FvaFinite,
}

/// Start law used by `run` for the general algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StartChoice {
    /// X_0 ~ μ_0 (uniform), A_0 ~ π̂^k.
    #[default]
    States,
    /// (X_0, A_0) uniform over the pair set.
    Pairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub episodes: u64,
    pub stride: u64,
    pub theta: f64,
    /// κ in α = N^-κ for the general algorithm.
    pub alpha_exponent: f64,
    pub start: StartChoice,
    pub master_seed: u64,
    pub replicate: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            episodes: 1000,
            stride: DEFAULT_STRIDE,
            theta: 1.0,
            alpha_exponent: 1.0,
            start: StartChoice::States,
            master_seed: 0,
            replicate: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: u64,
    /// ‖Q^k - Q*‖_∞
    pub q_error: f64,
    /// ‖V_{π^k} - V*‖_∞
    pub v_error: f64,
    /// N_k(x,a) in pair order.
    pub visits: Vec<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// CSV with columns `k,q_error,v_error` followed by one `n[x|a]` column
    /// per pair.
    pub fn write_csv<T: Scalar>(&self, m: &Mdp<T>, mut out: impl std::io::Write) -> std::io::Result<()> {
        let mut header = vec!["k".to_string(), "q_error".into(), "v_error".into()];
        for (x, a) in m.pairs() {
            header.push(format!("n[{}|{}]", m.state_name(x), m.action_name(x, a)));
        }
        writeln!(out, "{}", header.join(","))?;
        for r in &self.records {
            let mut row = vec![r.k.to_string(), format!("{:?}", r.q_error), format!("{:?}", r.v_error)];
            row.extend(r.visits.iter().map(u64::to_string));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// V* and Q* in f64, for metrics.
#[derive(Debug, Clone)]
pub struct Reference {
    pub mdp: Mdp<f64>,
    pub v_star: ValueFunction<f64>,
    pub q_star: QFunction<f64>,
}

impl Reference {
    pub fn new<S: Scalar>(m: &Mdp<S>) -> Result<Self> {
        let mdp = m.to_f64();
        let (v_star, q_star) = value_iteration(&mdp, SOLVE_TOL)?;
        Ok(Self { mdp, v_star, q_star })
    }

    pub fn record<S: Scalar>(
        &self,
        k: u64,
        q: &QFunction<S>,
        policy: &StationaryPolicy<S>,
        audit: &ScheduleAudit<S>,
    ) -> Result<TraceRecord> {
        let q = q.to_f64();
        let pi = StationaryPolicy { rows: q_rows_to_f64(&policy.rows) };
        let v = policy_evaluation(&self.mdp, &pi, Evaluation::LinearSolve)?;
        Ok(TraceRecord {
            k,
            q_error: q.sup_distance(&self.q_star),
            v_error: v.sup_distance(&self.v_star),
            visits: audit.pair_visits.iter().flatten().copied().collect(),
        })
    }
}

fn q_rows_to_f64<S: Scalar>(rows: &[Vec<S>]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| r.iter().map(Scalar::to_f64).collect()).collect()
}

/// Final state of a run, common to all algorithms.
#[derive(Debug, Clone)]
pub struct RunOutcome<S> {
    pub trace: RunTrace,
    pub q: QFunction<S>,
    pub epsilon: Vec<S>,
    pub audit: ScheduleAudit<S>,
    pub k: u64,
}

/// Tail horizon that keeps each first-visit return within
/// `RETURN_TOL_FACTOR (1 - γ)` of its infinite sum.
pub fn return_horizon<S: Scalar>(m: &Mdp<S>) -> Result<usize> {
    let gamma = m.gamma().to_f64();
    horizon_for_tolerance(gamma, m.max_abs_reward(), RETURN_TOL_FACTOR * (1.0 - gamma))
}

/// Validated triangle of `m`, or `None` when the document declares none.
pub fn validated_triangle<S: Scalar>(m: &Mdp<S>) -> Result<Option<ValidatedAbsorbing>> {
    match AbsorbingSpec::from_mdp(m) {
        None => Ok(None),
        Some(spec) => spec.validate(m).map(Some).map_err(|report| {
            Error::Contract(format!("absorbing set fails its check: {:?}", report.violations))
        }),
    }
}

/// Runs `config.episodes` steps of `algorithm` and records metrics every
/// `config.stride` episodes (and after the last one).
///
/// Episodes: `fva_finite` stops at absorption; `fva` and `general` use
/// absorbed episodes extended inside △ when a triangle is declared, and
/// tail-truncated episodes otherwise.
pub fn run<S: Scalar>(algorithm: Algorithm, m: &Mdp<S>, config: &RunConfig) -> Result<RunOutcome<S>> {
    if config.stride == 0 {
        return Err(Error::Argument("stride must be positive".into()));
    }
    let triangle = validated_triangle(m)?;
    let horizon = return_horizon(m)?;
    let mode = match (algorithm, &triangle) {
        (Algorithm::FvaFinite, Some(t)) => EpisodeMode::Absorbed { triangle: t, extension: 0 },
        (Algorithm::FvaFinite, None) => {
            return Err(Error::Contract("fva_finite needs a declared, valid triangle".into()))
        }
        (_, Some(t)) => EpisodeMode::Absorbed { triangle: t, extension: horizon },
        (_, None) => EpisodeMode::Tail { horizon },
    };
    let reference = Reference::new(m)?;
    let seed = SeedSpec::new(config.master_seed, config.replicate, 0);
    let mut trace = RunTrace::default();
    let keep = |k: u64| k % config.stride == 0 || k == config.episodes;

    match algorithm {
        Algorithm::Fva | Algorithm::FvaFinite => {
            let mu0 = match StartDist::<S>::uniform_states(m) {
                StartDist::States(mu) => mu,
                StartDist::Pairs(_) => unreachable!(),
            };
            let mut state = FvaState::new(m, config.theta)?;
            for k in 0..config.episodes {
                state = fva_step(state, m, &mu0, seed.with_episode(k), mode)?;
                if keep(state.k) {
                    trace.records.push(reference.record(state.k, &state.q, &state.policy(), &state.audit)?);
                }
            }
            Ok(RunOutcome { trace, epsilon: state.epsilon(), q: state.q, audit: state.audit, k: state.k })
        }
        Algorithm::General => {
            let start = match config.start {
                StartChoice::States => StartDist::uniform_states(m),
                StartChoice::Pairs => StartDist::uniform_pairs(m),
            };
            if !(config.theta > 0.0) || !(config.alpha_exponent > 0.0) {
                return Err(Error::Argument("theta and alpha_exponent must be positive".into()));
            }
            let schedules = VisitCountSchedules {
                theta: config.theta,
                alpha_exponent: config.alpha_exponent,
                start,
            };
            let mut state = GeneralState::new(m, schedules);
            for k in 0..config.episodes {
                state = general_step(state, m, seed.with_episode(k), mode)?;
                if keep(state.k) {
                    trace.records.push(reference.record(state.k, &state.q, &state.policy(), &state.audit)?);
                }
            }
            Ok(RunOutcome { trace, epsilon: state.epsilon(), q: state.q, audit: state.audit, k: state.k })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAudit {
    pub state: usize,
    pub action: usize,
    pub epsilon: f64,
    pub alpha_sum: f64,
    pub alpha_sq_sum: f64,
    pub visits: u64,
    pub last_visit: Option<u64>,
    /// Never visited, or not visited during the second half of the run.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqdevReport {
    pub episodes: u64,
    pub pairs: Vec<PairAudit>,
}

/// Desk-scale audit of the step-size conditions: per pair the final ε, the
/// sums Σα·1{τ<∞} and Σα²·1{τ<∞}, and the visit count.
pub fn check_cqdev<S: Scalar>(audit: &ScheduleAudit<S>, epsilon: &[S], episodes: u64) -> CqdevReport {
    let mut pairs = Vec::new();
    for (x, row) in audit.pair_visits.iter().enumerate() {
        for (a, &visits) in row.iter().enumerate() {
            let last = audit.last_visit[x][a];
            let stalled = match last {
                None => true,
                Some(k) => 2 * k <= episodes && episodes > 1,
            };
            pairs.push(PairAudit {
                state: x,
                action: a,
                epsilon: epsilon[x].to_f64(),
                alpha_sum: audit.alpha_sum[x][a].to_f64(),
                alpha_sq_sum: audit.alpha_sq_sum[x][a].to_f64(),
                visits,
                last_visit: last,
                flagged: stalled,
            });
        }
    }
    CqdevReport { episodes, pairs }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    pub k: u64,
    pub state: usize,
    pub action: usize,
    /// `"policy"` or `"q"`.
    pub quantity: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub episodes: u64,
    pub master_seed: u64,
    pub replicate: u64,
    pub divergence: Option<Divergence>,
}

impl CouplingReport {
    pub fn agreed(&self) -> bool {
        self.divergence.is_none()
    }
}

/// Runs the infinite-episode and finite-episode first-visit algorithms on
/// identical random streams and compares, for every k ≤ K, the policies on
/// states outside △ and the Q tables on pairs outside △, bit for bit.
///
/// The infinite-episode run uses absorbed episodes extended `extension`
/// steps inside △ (rewards there are exactly zero).
pub fn couple_alg2_alg3<S: Scalar>(
    m: &Mdp<S>,
    triangle: &ValidatedAbsorbing,
    mu0: &[S],
    theta: f64,
    seed: SeedSpec,
    episodes: u64,
    extension: usize,
) -> Result<CouplingReport> {
    let mut infinite = FvaState::new(m, theta)?;
    let mut finite = FvaState::new(m, theta)?;
    let outside: Vec<usize> = (0..m.n_states()).filter(|&x| !triangle.contains(x)).collect();
    let compare = |k: u64, a: &FvaState<S>, b: &FvaState<S>| -> Option<Divergence> {
        let (pa, pb) = (a.policy(), b.policy());
        for &x in &outside {
            for act in 0..m.n_actions(x) {
                if pa.rows[x][act] != pb.rows[x][act] {
                    return Some(Divergence { k, state: x, action: act, quantity: "policy".into() });
                }
                if a.q.rows[x][act] != b.q.rows[x][act] {
                    return Some(Divergence { k, state: x, action: act, quantity: "q".into() });
                }
            }
        }
        None
    };
    let report = |divergence| CouplingReport {
        episodes,
        master_seed: seed.master_seed,
        replicate: seed.replicate,
        divergence,
    };
    if let Some(d) = compare(0, &infinite, &finite) {
        return Ok(report(Some(d)));
    }
    for k in 0..episodes {
        let s = seed.with_episode(k);
        infinite = fva_step(infinite, m, mu0, s, EpisodeMode::Absorbed { triangle, extension })?;
        finite = fva_step(finite, m, mu0, s, EpisodeMode::Absorbed { triangle, extension: 0 })?;
        if let Some(d) = compare(k + 1, &infinite, &finite) {
            return Ok(report(Some(d)));
        }
    }
    Ok(report(None))
}
