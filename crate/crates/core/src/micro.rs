//! Brute-force checks of strategic play in tiny games.
//!
//! A game enumerates both states and every binary signal matrix. A pure
//! strategy of agent `i` assigns an action to each information set
//! `(own signals up to t, actions of N_i before t)`; tables are dense over all
//! such keys. Utility is `(1 - delta) * sum_{t <= T} delta^(t-1) P[a_t = theta]`,
//! the discounted sum truncated at the horizon.
//!
//! Deviation search enumerates the deviator's *reduced* strategies, indexed
//! by own signals and the other observed agents' actions only; the deviator's
//! own past actions follow from those, so every pure strategy has an
//! outcome-equivalent reduced form.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dynamics::{check_imitation, CurveMode, ImitationReport, MistakeCurve};
use crate::error::{Error, Result};
use crate::inference::{myopic_from_llr, TieRule, DEFAULT_TIE_RULE};
use crate::network::Network;
use crate::par;
use crate::signal::{Action, Label, SignalMatrix, SignalModel};

pub const MAX_AGENTS: usize = 3;
pub const MAX_HORIZON: usize = 3;
/// Largest deviator strategy space searched exhaustively.
pub const DEFAULT_STRATEGY_BUDGET: u64 = 1 << 22;
pub const GAIN_TOL: f64 = 1e-12;

struct Outcome {
    theta: Label,
    weight: f64,
    signals: SignalMatrix,
}

pub struct MicroGame {
    pub model: SignalModel,
    pub net: Network,
    pub horizon: usize,
    pub delta: f64,
    pub tie: TieRule,
    pub strategy_budget: u64,
    outcomes: Vec<Outcome>,
}

impl MicroGame {
    pub fn new(model: SignalModel, net: Network, horizon: usize, delta: f64) -> Result<Self> {
        let n = net.n_agents();
        if model.symmetric_accuracy().is_none() || !model.is_stationary() {
            return Err(Error::Config("micro games need stationary symmetric binary signals".into()));
        }
        if n == 0 || n > MAX_AGENTS {
            return Err(Error::Config(format!("micro games support 1..={MAX_AGENTS} agents, got {n}")));
        }
        if horizon == 0 || horizon > MAX_HORIZON {
            return Err(Error::Config(format!(
                "micro games support horizons 1..={MAX_HORIZON}, got {horizon}"
            )));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::Config(format!("discount must lie in [0, 1), got {delta}")));
        }
        let mut outcomes = Vec::new();
        for theta in Label::BOTH {
            for signals in SignalMatrix::enumerate(|_, _| 2, n, horizon) {
                let weight = 0.5 * model.log_prob_matrix(theta, &signals, horizon).exp();
                outcomes.push(Outcome { theta, weight, signals });
            }
        }
        Ok(MicroGame {
            model,
            net,
            horizon,
            delta,
            tie: DEFAULT_TIE_RULE,
            strategy_budget: DEFAULT_STRATEGY_BUDGET,
            outcomes,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.net.n_agents()
    }

    /// `(1 - delta) delta^t` for 0-based `t`.
    fn discount(&self, t: usize) -> f64 {
        (1.0 - self.delta) * self.delta.powi(t as i32)
    }

    fn sig_code(signals: &SignalMatrix, agent: usize, t: usize) -> usize {
        (0..=t).map(|k| (signals.get(agent, k) as usize) << k).sum()
    }

    /// Code of the actions of `agents` in periods `0..t`.
    fn act_code(agents: &[usize], actions: &[Vec<Action>], t: usize) -> usize {
        let mut code = 0;
        for k in 0..t {
            for (pos, &j) in agents.iter().enumerate() {
                code |= (actions[j][k].bit() as usize) << (k * agents.len() + pos);
            }
        }
        code
    }

    /// Dense index of agent `i`'s information set at period `t`.
    fn full_key(&self, agent: usize, t: usize, signals: &SignalMatrix, actions: &[Vec<Action>]) -> usize {
        Self::sig_code(signals, agent, t) | Self::act_code(self.net.neighbors(agent), actions, t) << (t + 1)
    }

    fn others(&self, agent: usize) -> Vec<usize> {
        self.net.neighbors(agent).iter().copied().filter(|&j| j != agent).collect()
    }

    /// Play a profile on one outcome; `forced` overrides one agent's actions.
    fn simulate(&self, profile: &[StrategyTable], o: &Outcome, forced: Option<(usize, &[Action])>) -> Vec<Vec<Action>> {
        let n = self.n_agents();
        let mut actions = vec![Vec::with_capacity(self.horizon); n];
        for t in 0..self.horizon {
            let step: Vec<Action> = (0..n)
                .map(|j| match forced {
                    Some((d, seq)) if d == j => seq[t],
                    _ => profile[j].periods[t][self.full_key(j, t, &o.signals, &actions)],
                })
                .collect();
            for (j, a) in step.into_iter().enumerate() {
                actions[j].push(a);
            }
        }
        actions
    }

    /// Posterior log-odds at every reached information set of `agent` at
    /// period `t`, given the profile's play before `t`.
    pub fn information_sets(&self, profile: &[StrategyTable], agent: usize, t: usize) -> HashMap<usize, f64> {
        let mut w: HashMap<usize, [f64; 2]> = HashMap::new();
        for o in &self.outcomes {
            let actions = self.simulate(profile, o, None);
            let key = self.full_key(agent, t, &o.signals, &actions);
            w.entry(key).or_insert([0.0; 2])[o.theta.index()] += o.weight;
        }
        w.into_iter()
            .filter(|(_, m)| m[0] + m[1] > 0.0)
            .map(|(k, m)| (k, m[0].ln() - m[1].ln()))
            .collect()
    }
}

/// One agent's pure strategy over all information sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyTable {
    pub agent: usize,
    /// `periods[t][key]`, `key = own signal bits | observed action bits << (t + 1)`
    pub periods: Vec<Vec<Action>>,
}

impl StrategyTable {
    /// Table of size appropriate for `agent` in `game`, filled by `f(t, sig_code, act_code)`.
    pub fn from_fn(game: &MicroGame, agent: usize, f: impl Fn(usize, usize, usize) -> Action) -> Self {
        let width = game.net.neighbors(agent).len();
        let periods = (0..game.horizon)
            .map(|t| {
                let sigs = 1usize << (t + 1);
                let acts = 1usize << (width * t);
                (0..sigs * acts).map(|key| f(t, key & (sigs - 1), key >> (t + 1))).collect()
            })
            .collect();
        StrategyTable { agent, periods }
    }

    /// Ignore everything and play `action`.
    pub fn constant(game: &MicroGame, agent: usize, action: Action) -> Self {
        Self::from_fn(game, agent, |_, _, _| action)
    }

    /// Myopic action on own signals alone.
    pub fn private_myopic(game: &MicroGame, agent: usize) -> Self {
        let llr1 = game.model.llr(agent, 0, "g").expect("binary model has g");
        let tie = game.tie;
        Self::from_fn(game, agent, move |t, sig, _| {
            let bad = sig.count_ones() as f64;
            let good = (t + 1) as f64 - bad;
            myopic_from_llr((good - bad) * llr1, tie)
        })
    }

    pub fn size(&self) -> usize {
        self.periods.iter().map(Vec::len).sum()
    }
}

/// Bayesian myopic profile: each agent best-responds period by period to
/// its posterior under everyone's earlier play. Information sets no outcome
/// reaches fall back to the private-signal myopic action.
pub fn myopic_profile(game: &MicroGame) -> Vec<StrategyTable> {
    let n = game.n_agents();
    let mut profile: Vec<StrategyTable> = (0..n).map(|i| StrategyTable::private_myopic(game, i)).collect();
    for t in 0..game.horizon {
        for (i, table) in profile.clone().iter().enumerate() {
            let sets = game.information_sets(&profile, i, t);
            let mut periods = table.periods.clone();
            for (key, llr) in sets {
                periods[t][key] = myopic_from_llr(llr, game.tie);
            }
            profile[i].periods = periods;
        }
    }
    profile
}

/// Per agent, per period `P[a_t = theta]`.
pub fn profile_accuracies(game: &MicroGame, profile: &[StrategyTable]) -> Vec<Vec<f64>> {
    let mut acc = vec![vec![0.0; game.horizon]; game.n_agents()];
    for o in &game.outcomes {
        let actions = game.simulate(profile, o, None);
        for (i, row) in actions.iter().enumerate() {
            for (t, &a) in row.iter().enumerate() {
                if a == o.theta {
                    acc[i][t] += o.weight;
                }
            }
        }
    }
    acc
}

/// Exact mistake curve of a profile.
pub fn profile_curve(game: &MicroGame, profile: &[StrategyTable]) -> MistakeCurve {
    let n = game.n_agents();
    let mut mass = [vec![0.0; n * game.horizon], vec![0.0; n * game.horizon]];
    for o in &game.outcomes {
        let actions = game.simulate(profile, o, None);
        for (i, row) in actions.iter().enumerate() {
            for (t, &a) in row.iter().enumerate() {
                if a != o.theta {
                    // conditional on the state: undo the 1/2 prior
                    mass[o.theta.index()][i * game.horizon + t] += 2.0 * o.weight;
                }
            }
        }
    }
    let log = mass.map(|v| v.into_iter().map(f64::ln).collect());
    MistakeCurve::exact(CurveMode::ExactForward, n, game.horizon, log)
}

/// Expected discounted utility of every agent.
pub fn expected_utility(game: &MicroGame, profile: &[StrategyTable]) -> Vec<f64> {
    profile_accuracies(game, profile)
        .into_iter()
        .map(|row| row.iter().enumerate().map(|(t, a)| game.discount(t) * a).sum())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationMode {
    /// Every reduced strategy of the deviator.
    Exhaustive,
    /// Single information-set flips with myopic continuation: a necessary
    /// condition only.
    OneShot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationResult {
    /// 1-based
    pub agent: usize,
    pub mode: DeviationMode,
    pub current_utility: f64,
    pub best_utility: f64,
    pub gain: f64,
    pub candidates: u64,
    pub best: StrategyTable,
}

/// Reduced-strategy layout of one deviator.
struct Reduced {
    others: Vec<usize>,
    /// first bit of each period's block
    offset: Vec<usize>,
    bits: usize,
}

impl Reduced {
    fn new(game: &MicroGame, agent: usize) -> Self {
        let others = game.others(agent);
        let mut offset = Vec::with_capacity(game.horizon);
        let mut bits = 0;
        for t in 0..game.horizon {
            offset.push(bits);
            bits += 1 << (t + 1 + others.len() * t);
        }
        Reduced { others, offset, bits }
    }

    fn key(&self, agent: usize, t: usize, o: &Outcome, actions: &[Vec<Action>]) -> usize {
        self.offset[t] + (MicroGame::sig_code(&o.signals, agent, t) | MicroGame::act_code(&self.others, actions, t) << (t + 1))
    }

    /// Full table playing reduced strategy `code`.
    fn table(&self, game: &MicroGame, agent: usize, code: u64) -> StrategyTable {
        // split the agent's observed set into own and others' positions
        let nbrs = game.net.neighbors(agent).to_vec();
        let width = nbrs.len();
        StrategyTable::from_fn(game, agent, |t, sig, act| {
            let mut other_code = 0;
            for k in 0..t {
                for (pos, &j) in self.others.iter().enumerate() {
                    let full_pos = nbrs.iter().position(|&x| x == j).expect("neighbor");
                    let bit = act >> (k * width + full_pos) & 1;
                    other_code |= bit << (k * self.others.len() + pos);
                }
            }
            let bit = code >> (self.offset[t] + (sig | other_code << (t + 1))) & 1;
            Label::from_bit(bit == 1)
        })
    }
}

/// Decision tree of one outcome over the deviator's action sequence: node `k`
/// at depth `t` has children `2k + 1` (g) and `2k + 2` (b).
struct OutcomeTree {
    theta_bit: u64,
    /// per node: (reduced key, payoff if the action is correct)
    nodes: Vec<(usize, f64)>,
}

fn build_trees(game: &MicroGame, profile: &[StrategyTable], agent: usize, layout: &Reduced) -> Vec<OutcomeTree> {
    let horizon = game.horizon;
    let leaves = 1usize << horizon;
    game.outcomes
        .iter()
        .map(|o| {
            let mut nodes = vec![(0usize, 0.0); leaves - 1];
            for seq_code in 0..leaves {
                let seq: Vec<Action> = (0..horizon).map(|t| Label::from_bit(seq_code >> t & 1 == 1)).collect();
                let actions = game.simulate(profile, o, Some((agent, &seq)));
                let mut node = 0usize;
                for t in 0..horizon {
                    nodes[node] = (layout.key(agent, t, o, &actions), o.weight * game.discount(t));
                    node = 2 * node + 1 + seq[t].bit() as usize;
                }
            }
            OutcomeTree {
                theta_bit: o.theta.bit(),
                nodes,
            }
        })
        .collect()
}

fn tree_utility(trees: &[OutcomeTree], code: u64, horizon: usize) -> f64 {
    let mut u = 0.0;
    for tree in trees {
        let mut node = 0usize;
        for _ in 0..horizon {
            let (key, pay) = tree.nodes[node];
            let bit = code >> key & 1;
            if bit == tree.theta_bit {
                u += pay;
            }
            node = 2 * node + 1 + bit as usize;
        }
    }
    u
}

const SEARCH_CHUNK: u64 = 4096;

/// Best response of `agent` (0-based) to the rest of `profile`.
pub fn best_deviation(
    game: &MicroGame,
    profile: &[StrategyTable],
    agent: usize,
    mode: DeviationMode,
    threads: Option<usize>,
) -> Result<DeviationResult> {
    match mode {
        DeviationMode::Exhaustive => exhaustive(game, profile, agent, threads),
        DeviationMode::OneShot => one_shot(game, profile, agent),
    }
}

fn exhaustive(game: &MicroGame, profile: &[StrategyTable], agent: usize, threads: Option<usize>) -> Result<DeviationResult> {
    let layout = Reduced::new(game, agent);
    let size = if layout.bits >= 64 { u64::MAX } else { 1u64 << layout.bits };
    if layout.bits >= 64 || size > game.strategy_budget {
        return Err(Error::Budget(format!(
            "deviator {} has 2^{} reduced strategies (n={}, T={}); budget is {}",
            agent + 1,
            layout.bits,
            game.n_agents(),
            game.horizon,
            game.strategy_budget
        )));
    }
    let trees = build_trees(game, profile, agent, &layout);
    let chunks = size.div_ceil(SEARCH_CHUNK) as usize;
    let better = |a: (f64, u64), b: (f64, u64)| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a };
    let (best_utility, best_code) = par::map_reduce(
        chunks,
        threads,
        || (),
        |_, c| {
            let lo = c as u64 * SEARCH_CHUNK;
            let hi = (lo + SEARCH_CHUNK).min(size);
            (lo..hi).fold((f64::NEG_INFINITY, u64::MAX), |acc, code| {
                better(acc, (tree_utility(&trees, code, game.horizon), code))
            })
        },
        || (f64::NEG_INFINITY, u64::MAX),
        better,
    );
    let current_utility = expected_utility(game, profile)[agent];
    Ok(DeviationResult {
        agent: agent + 1,
        mode: DeviationMode::Exhaustive,
        current_utility,
        best_utility,
        gain: best_utility - current_utility,
        candidates: size,
        best: layout.table(game, agent, best_code),
    })
}

fn one_shot(game: &MicroGame, profile: &[StrategyTable], agent: usize) -> Result<DeviationResult> {
    let current_utility = expected_utility(game, profile)[agent];
    let mut best = (current_utility, profile[agent].clone());
    let mut candidates = 0u64;
    for t in 0..game.horizon {
        let mut keys: Vec<usize> = game.information_sets(profile, agent, t).into_keys().collect();
        keys.sort_unstable();
        for key in keys {
            candidates += 1;
            let mut trial = profile.to_vec();
            let flipped = trial[agent].periods[t][key].flip();
            trial[agent].periods[t][key] = flipped;
            for s in t + 1..game.horizon {
                for (k, llr) in game.information_sets(&trial, agent, s) {
                    trial[agent].periods[s][k] = myopic_from_llr(llr, game.tie);
                }
            }
            let u = expected_utility(game, &trial)[agent];
            if u > best.0 {
                best = (u, trial[agent].clone());
            }
        }
    }
    Ok(DeviationResult {
        agent: agent + 1,
        mode: DeviationMode::OneShot,
        current_utility,
        best_utility: best.0,
        gain: best.0 - current_utility,
        candidates,
        best: best.1,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma1Status {
    /// `|L|` at or above the threshold and the action is myopic
    Pass,
    /// `|L|` at or above the threshold and the action is not myopic
    Violation,
    /// `|L|` below the threshold: no constraint
    BelowThreshold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Entry {
    /// 1-based
    pub agent: usize,
    /// 1-based
    pub t: usize,
    pub key: usize,
    pub llr: f64,
    pub action: Action,
    pub myopic: Action,
    pub status: Lemma1Status,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    pub delta: f64,
    /// `-ln(1 - delta)`
    pub threshold: f64,
    pub entries: Vec<Lemma1Entry>,
    pub violations: usize,
    pub below_threshold: usize,
}

/// Where `|L| >= -ln(1 - delta)` the profile must play myopically.
pub fn check_lemma1_threshold(game: &MicroGame, profile: &[StrategyTable]) -> Lemma1Report {
    let threshold = 0.0 - (1.0 - game.delta).ln();
    let mut entries = Vec::new();
    for i in 0..game.n_agents() {
        for t in 0..game.horizon {
            let mut sets: Vec<(usize, f64)> = game.information_sets(profile, i, t).into_iter().collect();
            sets.sort_by_key(|s| s.0);
            for (key, llr) in sets {
                let action = profile[i].periods[t][key];
                let myopic = myopic_from_llr(llr, game.tie);
                let status = if llr.abs() < threshold {
                    Lemma1Status::BelowThreshold
                } else if action == myopic {
                    Lemma1Status::Pass
                } else {
                    Lemma1Status::Violation
                };
                entries.push(Lemma1Entry {
                    agent: i + 1,
                    t: t + 1,
                    key,
                    llr,
                    action,
                    myopic,
                    status,
                });
            }
        }
    }
    let count = |s| entries.iter().filter(|e| e.status == s).count();
    Lemma1Report {
        delta: game.delta,
        threshold,
        violations: count(Lemma1Status::Violation),
        below_threshold: count(Lemma1Status::BelowThreshold),
        entries,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicroReport {
    pub n_agents: usize,
    pub horizon: usize,
    pub p: f64,
    pub delta: f64,
    pub mode: DeviationMode,
    /// one-shot results are a necessary condition, not a certificate
    pub necessary_condition_only: bool,
    pub utilities: Vec<f64>,
    pub deviations: Vec<DeviationResult>,
    /// every gain within tolerance
    pub equilibrium_candidate: bool,
    pub lemma1: Lemma1Report,
    /// imitation bound on the profile's exact mistake curve
    pub imitation: ImitationReport,
}

/// Check the myopic profile of `game`.
pub fn check_myopic(game: &MicroGame, mode: DeviationMode, threads: Option<usize>) -> Result<MicroReport> {
    let profile = myopic_profile(game);
    let deviations = (0..game.n_agents())
        .map(|i| best_deviation(game, &profile, i, mode, threads))
        .collect::<Result<Vec<_>>>()?;
    let equilibrium_candidate = deviations.iter().all(|d| d.gain <= GAIN_TOL);
    Ok(MicroReport {
        n_agents: game.n_agents(),
        horizon: game.horizon,
        p: game.model.symmetric_accuracy().unwrap_or(f64::NAN),
        delta: game.delta,
        mode,
        necessary_condition_only: mode == DeviationMode::OneShot,
        utilities: expected_utility(game, &profile),
        deviations,
        equilibrium_candidate,
        lemma1: check_lemma1_threshold(game, &profile),
        imitation: check_imitation(&profile_curve(game, &profile), &game.net, game.delta),
    })
}

impl MicroReport {
    pub fn render(&self) -> String {
        let mut s = format!(
            "micro game: n={} T={} p={} delta={} mode={:?}\n",
            self.n_agents, self.horizon, self.p, self.delta, self.mode
        );
        if self.necessary_condition_only {
            s += "note: one-shot deviations give a necessary condition only\n";
        }
        for d in &self.deviations {
            s += &format!(
                "agent {}: utility {:.12} best deviation {:.12} gain {:.3e} over {} candidates\n",
                d.agent, d.current_utility, d.best_utility, d.gain, d.candidates
            );
        }
        s += &format!("equilibrium candidate: {}\n", self.equilibrium_candidate);
        s += &format!(
            "threshold -ln(1-delta) = {:.4}: {} sets checked, {} below threshold, {} violations\n",
            self.lemma1.threshold,
            self.lemma1.entries.len(),
            self.lemma1.below_threshold,
            self.lemma1.violations
        );
        s += &format!(
            "imitation bound: {} comparisons, {} violations\n",
            self.imitation.checked,
            self.imitation.violations.len()
        );
        s
    }
}
