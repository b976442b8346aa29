//! Monte Carlo and exact-forward experiments over the belief engines.

mod curve;

pub use curve::{Conditioning, CurveMode, MistakeCurve, MistakePatterns};

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{
    build_engine, resolve_engine, BeliefEngine, BeliefState, EngineChoice, EngineKind, FilterEngine, FilterMode, GenericEngine, Trajectory,
    DEFAULT_TIE_RULE,
};
use crate::network::Network;
use crate::par;
use crate::rng;
use crate::signal::{Action, Label, SignalModel, WorldState};

/// Tolerance for `|P| <= M t` and `L = S + P`.
pub const INVARIANT_TOL: f64 = 1e-9;

/// Trials per parallel work item.
pub const CHUNK: u64 = 1024;

/// Mistake patterns fit in a `u64` bitmask up to this horizon.
pub const MAX_PATTERN_HORIZON: usize = 64;

const KEEP_VIOLATIONS: usize = 100;
const KEEP_TRAJECTORIES: usize = 3;

/// One simulated run, in a serializable shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub trial: Option<u64>,
    pub theta: WorldState,
    /// `signals[agent][t]`
    pub signals: Vec<Vec<u8>>,
    pub actions: Vec<Vec<Action>>,
    pub beliefs: Vec<Vec<BeliefState>>,
    /// `|L| < 1e-12`: the action came from the tie rule.
    pub tied: Vec<Vec<bool>>,
}

impl TrajectoryRecord {
    pub fn new(trial: Option<u64>, theta: WorldState, traj: &Trajectory) -> Self {
        let n = traj.n_agents();
        let horizon = traj.horizon();
        let per = |f: &dyn Fn(usize, usize) -> _| -> Vec<Vec<_>> { (0..n).map(|i| (0..horizon).map(|t| f(i, t)).collect()).collect() };
        TrajectoryRecord {
            trial,
            theta,
            signals: (0..n).map(|i| traj.signals.row(i).to_vec()).collect(),
            actions: per(&|i, t| traj.action(i, t)),
            beliefs: (0..n).map(|i| (0..horizon).map(|t| *traj.belief(i, t)).collect()).collect(),
            tied: (0..n).map(|i| (0..horizon).map(|t| traj.is_tied(i, t)).collect()).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// `|P| > M t + tol`
    PrivateBound,
    /// `|L - S - P| > tol`
    Identity,
    /// action differs from the myopic action of the recorded belief
    Action,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub trial: Option<u64>,
    /// 1-based
    pub agent: usize,
    /// 1-based
    pub t: usize,
    pub value: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub total: u64,
    /// The first violations in (trial, agent, t) order.
    pub violations: Vec<Violation>,
    /// Full trajectories of the first violating trials.
    pub trajectories: Vec<TrajectoryRecord>,
}

impl ViolationReport {
    pub fn is_clean(&self) -> bool {
        self.total == 0
    }

    fn merge(&mut self, mut other: ViolationReport) {
        self.total += other.total;
        self.violations.append(&mut other.violations);
        self.violations.sort_by(|a, b| {
            (a.trial, a.agent, a.t)
                .cmp(&(b.trial, b.agent, b.t))
                .then(a.kind.cmp_key().cmp(&b.kind.cmp_key()))
        });
        self.violations.truncate(KEEP_VIOLATIONS);
        self.trajectories.append(&mut other.trajectories);
        self.trajectories.sort_by_key(|r| r.trial);
        self.trajectories.truncate(KEEP_TRAJECTORIES);
    }
}

impl ViolationKind {
    fn cmp_key(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} invariant violation(s)", self.total)?;
        if let Some(v) = self.violations.first() {
            write!(
                f,
                "; first: {:?} at agent {}, t={}{}: value {} vs bound {}",
                v.kind,
                v.agent,
                v.t,
                v.trial.map(|k| format!(", trial {k}")).unwrap_or_default(),
                v.value,
                v.bound
            )?;
        }
        Ok(())
    }
}

/// Check `|P| <= M t`, `L = S + P` and myopic actions on one trajectory.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must count as a violation
pub fn check_trajectory(traj: &Trajectory, m: f64, trial: Option<u64>, tie: crate::inference::TieRule) -> Vec<Violation> {
    let mut out = Vec::new();
    for i in 0..traj.n_agents() {
        for t in 0..traj.horizon() {
            let b = traj.belief(i, t);
            let bound = m * (t + 1) as f64 + INVARIANT_TOL;
            let mut push = |kind, value, bound| {
                out.push(Violation {
                    kind,
                    trial,
                    agent: i + 1,
                    t: t + 1,
                    value,
                    bound,
                })
            };
            if !(b.private.abs() <= bound) {
                push(ViolationKind::PrivateBound, b.private, bound);
            }
            let gap = (b.llr - b.social - b.private).abs();
            if !(gap <= INVARIANT_TOL) {
                push(ViolationKind::Identity, gap, INVARIANT_TOL);
            }
            if crate::inference::myopic_from_llr(b.llr, tie) != traj.action(i, t) {
                push(ViolationKind::Action, b.llr, 0.0);
            }
        }
    }
    out
}

/// `S_t / t` per agent for one trial, for trend plots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub trial: u64,
    pub theta: WorldState,
    /// `social_rate[agent][t] = S^i_t / t` (t 1-based)
    pub social_rate: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct McOptions {
    pub trials: u64,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Record violations and continue instead of failing the run.
    pub collect_violations: bool,
    /// Number of leading trials whose `S/t` paths are kept.
    pub sample_paths: u64,
    /// Keep per-trial mistake patterns for the trial bootstrap.
    pub patterns: bool,
    pub enumeration_budget: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            trials: 10_000,
            seed: 0,
            threads: None,
            collect_violations: false,
            sample_paths: 0,
            patterns: true,
            enumeration_budget: crate::inference::DEFAULT_ENUMERATION_BUDGET,
        }
    }
}

#[derive(Clone, Debug)]
pub struct McOutput {
    pub engine: EngineKind,
    pub curve: MistakeCurve,
    pub violations: ViolationReport,
    pub sample_paths: Vec<SamplePath>,
}

struct McAcc {
    mistakes: [Vec<u64>; 2],
    trials: [u64; 2],
    patterns: Option<MistakePatterns>,
    violations: ViolationReport,
    paths: Vec<SamplePath>,
    error: Option<(u64, Error)>,
}

impl McAcc {
    fn new(n: usize, horizon: usize, patterns: bool) -> Self {
        McAcc {
            mistakes: [vec![0; n * horizon], vec![0; n * horizon]],
            trials: [0, 0],
            patterns: patterns.then(|| MistakePatterns::new(n)),
            violations: ViolationReport::default(),
            paths: Vec::new(),
            error: None,
        }
    }

    fn merge(mut self, other: McAcc) -> McAcc {
        for s in 0..2 {
            for (a, b) in self.mistakes[s].iter_mut().zip(&other.mistakes[s]) {
                *a += b;
            }
            self.trials[s] += other.trials[s];
        }
        if let (Some(a), Some(b)) = (&mut self.patterns, &other.patterns) {
            a.merge(b);
        }
        self.violations.merge(other.violations);
        self.paths.extend(other.paths);
        self.paths.sort_by_key(|p| p.trial);
        self.error = match (self.error, other.error) {
            (Some(a), Some(b)) => Some(if a.0 <= b.0 { a } else { b }),
            (a, b) => a.or(b),
        };
        self
    }
}

/// Draw the state for a trial seed.
pub fn trial_state(trial_seed: u64) -> WorldState {
    Label::from_bit(rng::state_stream(trial_seed).random::<bool>())
}

/// Simulate `opts.trials` independent runs of the myopic dynamics.
///
/// Each trial draws the state uniformly, then signals, plays the engine, and
/// checks every belief invariant. Results are identical for any worker count.
pub fn run_monte_carlo(model: &SignalModel, net: &Network, horizon: usize, choice: EngineChoice, opts: &McOptions) -> Result<McOutput> {
    if opts.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let n = net.n_agents();
    let kind = resolve_engine(choice, model, net)?;
    let engine = build_engine(kind, model, net, horizon, DEFAULT_TIE_RULE, opts.enumeration_budget)?;
    let m = model.bound_m();
    let patterns = opts.patterns && horizon <= MAX_PATTERN_HORIZON;
    let chunks = opts.trials.div_ceil(CHUNK) as usize;
    let engine: &dyn BeliefEngine = engine.as_ref();

    let run_chunk = |scratch: &mut _, c: usize| -> McAcc {
        let mut acc = McAcc::new(n, horizon, patterns);
        let first = c as u64 * CHUNK;
        let last = (first + CHUNK).min(opts.trials);
        for k in first..last {
            let seed = rng::trial_seed(opts.seed, k);
            let theta = trial_state(seed);
            let s = theta.index();
            let signals = model.sample_signals(theta, n, horizon, seed);
            let traj = match engine.play_scratch(&signals, scratch) {
                Ok(tr) => tr,
                Err(e) => {
                    acc.error = Some((k, e));
                    return acc;
                }
            };
            acc.trials[s] += 1;
            for i in 0..n {
                let mut bits = 0u64;
                for t in 0..horizon {
                    if traj.action(i, t) != theta {
                        acc.mistakes[s][i * horizon + t] += 1;
                        bits |= 1 << t;
                    }
                }
                if let Some(p) = &mut acc.patterns {
                    p.add(s, i, bits, 1);
                }
            }
            let found = check_trajectory(&traj, m, Some(k), engine.tie_rule());
            if !found.is_empty() {
                let mut rep = ViolationReport {
                    total: found.len() as u64,
                    violations: found,
                    trajectories: vec![TrajectoryRecord::new(Some(k), theta, &traj)],
                };
                rep.violations.truncate(KEEP_VIOLATIONS);
                acc.violations.merge(rep);
            }
            if k < opts.sample_paths {
                acc.paths.push(SamplePath {
                    trial: k,
                    theta,
                    social_rate: (0..n)
                        .map(|i| (0..horizon).map(|t| traj.belief(i, t).social / (t + 1) as f64).collect())
                        .collect(),
                });
            }
        }
        acc
    };

    let acc = par::map_reduce(
        chunks,
        opts.threads,
        || engine.scratch(),
        run_chunk,
        || McAcc::new(n, horizon, patterns),
        McAcc::merge,
    );
    if let Some((_, e)) = acc.error {
        return Err(e);
    }
    if !acc.violations.is_clean() && !opts.collect_violations {
        return Err(Error::Invariant(Box::new(acc.violations)));
    }
    Ok(McOutput {
        engine: kind,
        curve: MistakeCurve::from_counts(n, horizon, acc.mistakes, acc.trials, acc.patterns),
        violations: acc.violations,
        sample_paths: acc.paths,
    })
}

/// Exact mistake probabilities, from enumeration weights (generic engine) or
/// forward expansion over reachable action histories (filter engines).
/// Budget overflow is an error, never an approximation.
pub fn run_exact_forward(model: &SignalModel, net: &Network, horizon: usize, choice: EngineChoice, budget: u64) -> Result<MistakeCurve> {
    let kind = resolve_engine(choice, model, net)?;
    let n = net.n_agents();
    let (log_mistake, log_mass) = match kind {
        EngineKind::Generic => {
            let e = GenericEngine::build(model, net, horizon, DEFAULT_TIE_RULE, budget)?;
            let x = e.exact_mistakes();
            (x.log_mistake.clone(), x.log_mass.clone())
        }
        EngineKind::Factorized | EngineKind::Star => {
            let mode = if kind == EngineKind::Star {
                FilterMode::Star
            } else {
                FilterMode::Complete
            };
            FilterEngine::new(mode, model, net, horizon, DEFAULT_TIE_RULE)?.exact_forward(budget)?
        }
    };
    for mass in log_mass.iter().flatten() {
        if (mass.exp() - 1.0).abs() > 1e-10 {
            return Err(Error::Invariant(Box::new(ViolationReport {
                total: 1,
                violations: vec![],
                trajectories: vec![],
            })));
        }
    }
    Ok(MistakeCurve::exact(CurveMode::ExactForward, n, horizon, log_mistake))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImitationViolation {
    /// 1-based observer and observed agents
    pub observer: usize,
    pub observed: usize,
    /// observer's period (1-based); compared with the observed agent's `t - 1`
    pub t: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImitationReport {
    pub delta: f64,
    pub checked: usize,
    pub violations: Vec<ImitationViolation>,
}

impl ImitationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check `P[a^i_t != theta] <= P[a^j_{t-1} != theta] / (1 - delta)` for every
/// `j` observed by `i`, with 4 joint standard errors of slack on Monte Carlo curves.
pub fn check_imitation(curve: &MistakeCurve, net: &Network, delta: f64) -> ImitationReport {
    let mut report = ImitationReport {
        delta,
        ..Default::default()
    };
    let all = Conditioning::All;
    for i in 0..curve.n_agents() {
        for &j in net.neighbors(i) {
            for t in 1..curve.horizon() {
                let lhs = curve.p_hat(all, i, t);
                let mut rhs = curve.p_hat(all, j, t - 1) / (1.0 - delta);
                rhs += if curve.mode.is_exact() {
                    1e-12
                } else {
                    4.0 * (curve.se(all, i, t).powi(2) + curve.se(all, j, t - 1).powi(2)).sqrt()
                };
                report.checked += 1;
                if lhs > rhs {
                    report.violations.push(ImitationViolation {
                        observer: i + 1,
                        observed: j + 1,
                        t: t + 1,
                        lhs,
                        rhs,
                    });
                }
            }
        }
    }
    report
}
