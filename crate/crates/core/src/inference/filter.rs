//! Count-filter engine for networks where observed agents' observations are
//! themselves observed (complete and star networks).
//!
//! With stationary binary signals an agent's action depends on its own
//! signals only through the count of symbol-0 signals. Given the actions an
//! observer sees, the set of an agent's signal prefixes consistent with its
//! own actions factorizes across agents, so each agent carries one filter per
//! state: the probability mass of each count restricted to consistent paths.
//! Then for agent `j` at period `t` with count `c`:
//!
//! ```text
//! L = llr(c) + sum_{k in N_j, k != j} ln(F_k^g / F_k^b)
//! S = sum_{k in N_j} ln(F_k^g / F_k^b)
//! P = llr(c) - ln(F_j^g / F_j^b)
//! ```
//!
//! where `F_k^theta` is the total mass of `k`'s filter before period `t`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::inference::{check_signal_shape, myopic_from_llr, BeliefEngine, BeliefState, EngineKind, EngineScratch, TieRule, Trajectory};
use crate::logspace::LogAcc;
use crate::network::Network;
use crate::signal::{Action, Label, SignalMatrix, SignalModel};

/// Relative filter masses underflow past roughly this many periods.
pub const MAX_FILTER_HORIZON: usize = 300;

/// Nodes kept per worker by the public-history cache.
pub const DEFAULT_CACHE_NODES: usize = 1 << 17;

/// Default node budget for exact forward expansion.
pub const DEFAULT_NODE_BUDGET: u64 = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterMode {
    Complete,
    Star,
}

/// Mass over counts of symbol 0, per state, normalized with a log scale.
#[derive(Clone, Debug, PartialEq)]
struct CountFilter {
    mass: [Vec<f64>; 2],
    log_scale: [f64; 2],
}

impl CountFilter {
    fn new() -> Self {
        CountFilter {
            mass: [vec![1.0], vec![1.0]],
            log_scale: [0.0, 0.0],
        }
    }

    #[inline]
    fn log_ratio(&self) -> f64 {
        self.log_scale[0] - self.log_scale[1]
    }

    /// Advance one signal; `p0[s]` is the probability of symbol 0 under state s.
    fn predict(&mut self, p0: [f64; 2]) {
        for s in 0..2 {
            let old = &self.mass[s];
            let mut new = vec![0.0; old.len() + 1];
            for (c, &m) in old.iter().enumerate() {
                new[c] += m * (1.0 - p0[s]);
                new[c + 1] += m * p0[s];
            }
            self.mass[s] = new;
        }
    }

    /// Mass (relative to the current scale) of counts satisfying `keep`.
    fn kept_mass(&self, s: usize, keep: &impl Fn(usize) -> bool) -> f64 {
        self.mass[s].iter().enumerate().filter(|(c, _)| keep(*c)).map(|(_, m)| m).sum()
    }

    /// Restrict to counts satisfying `keep`; false if no mass survives.
    fn condition(&mut self, keep: impl Fn(usize) -> bool) -> bool {
        for s in 0..2 {
            let mut total = 0.0;
            for (c, m) in self.mass[s].iter_mut().enumerate() {
                if keep(c) {
                    total += *m;
                } else {
                    *m = 0.0;
                }
            }
            if total <= 0.0 {
                return false;
            }
            self.mass[s].iter_mut().for_each(|m| *m /= total);
            self.log_scale[s] += total.ln();
        }
        true
    }
}

pub struct FilterEngine {
    mode: FilterMode,
    net: Network,
    horizon: usize,
    tie: TieRule,
    /// probability of symbol 0 under g and under b
    p0: [f64; 2],
    /// llr of symbol 0 and symbol 1
    llr: [f64; 2],
    /// `others[j]`: agents in N_j other than j
    others: Vec<Vec<usize>>,
}

impl FilterEngine {
    pub fn check(mode: FilterMode, model: &SignalModel, net: &Network) -> Result<()> {
        let engine = match mode {
            FilterMode::Complete => "factorized",
            FilterMode::Star => "star",
        };
        let mismatch = |reason: String| Err(Error::EngineMismatch { engine, reason });
        let Some(dist) = model.stationary_dist() else {
            return mismatch("signals must be stationary".into());
        };
        if dist.len() != 2 {
            return mismatch(format!("signals must be binary, alphabet has {} symbols", dist.len()));
        }
        match mode {
            FilterMode::Complete if !net.is_complete() => mismatch("network is not complete".into()),
            FilterMode::Star if net.star_center().is_none() => mismatch("network is not a star".into()),
            _ => Ok(()),
        }
    }

    pub fn new(mode: FilterMode, model: &SignalModel, net: &Network, horizon: usize, tie: TieRule) -> Result<Self> {
        Self::check(mode, model, net)?;
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if horizon > MAX_FILTER_HORIZON {
            return Err(Error::Budget(format!(
                "filter engine horizon {horizon} exceeds {MAX_FILTER_HORIZON}"
            )));
        }
        let dist = model.stationary_dist().expect("checked stationary");
        let others = (0..net.n_agents())
            .map(|j| net.neighbors(j).iter().copied().filter(|&k| k != j).collect())
            .collect();
        Ok(FilterEngine {
            mode,
            net: net.clone(),
            horizon,
            tie,
            p0: [dist.prob(Label::G, 0), dist.prob(Label::B, 0)],
            llr: [dist.llr(0), dist.llr(1)],
            others,
        })
    }

    pub fn mode(&self) -> FilterMode {
        self.mode
    }

    /// LLR of `count` symbol-0 signals out of `len`.
    #[inline]
    fn count_llr(&self, count: usize, len: usize) -> f64 {
        count as f64 * self.llr[0] + (len - count) as f64 * self.llr[1]
    }

    /// State at the start of period `t`, from filters conditioned on all
    /// actions before `t`.
    fn node(&self, t: usize, mut filters: Vec<CountFilter>) -> Node {
        let n = filters.len();
        let ratio: Vec<f64> = filters.iter().map(CountFilter::log_ratio).collect();
        filters.iter_mut().for_each(|f| f.predict(self.p0));
        let social: Vec<f64> = (0..n).map(|j| self.others[j].iter().map(|&k| ratio[k]).sum()).collect();
        let width = t + 2;
        let mut rule = Vec::with_capacity(n * width);
        for &soc in &social {
            rule.extend((0..width).map(|c| myopic_from_llr(self.count_llr(c, t + 1) + soc, self.tie) == Label::G));
        }
        Node {
            period: t,
            ratio,
            social,
            rule,
            filters,
            children: HashMap::new(),
        }
    }

    fn root(&self) -> Node {
        self.node(0, vec![CountFilter::new(); self.net.n_agents()])
    }

    /// Condition a node's filters on the action profile `bits` (bit j set iff
    /// agent j played b). `None` if the profile has probability zero.
    fn advance(&self, node: &Node, bits: u64) -> Option<Vec<CountFilter>> {
        let mut filters = node.filters.clone();
        for (j, f) in filters.iter_mut().enumerate() {
            let plays_g = bits >> j & 1 == 0;
            if !f.condition(|c| node.plays_g(j, c) == plays_g) {
                return None;
            }
        }
        Some(filters)
    }

    fn record(&self, node: &Node, counts: &[usize], traj: &mut Trajectory) -> u64 {
        let t = node.period;
        let mut bits = 0u64;
        for (j, &c) in counts.iter().enumerate() {
            let own = self.count_llr(c, t + 1);
            let llr = own + node.social[j];
            let action = if node.plays_g(j, c) { Label::G } else { Label::B };
            bits |= action.bit() << j;
            let belief = BeliefState::new(llr, node.social[j] + node.ratio[j], own - node.ratio[j]);
            traj.record(j, t, action, belief);
        }
        bits
    }

    fn update_counts(signals: &SignalMatrix, t: usize, counts: &mut [usize]) {
        for (j, c) in counts.iter_mut().enumerate() {
            if signals.get(j, t) == 0 {
                *c += 1;
            }
        }
    }

    /// Like [`BeliefEngine::play`], but reuses public-history nodes across
    /// calls. Falls back to uncached play once the cache is full.
    pub fn play_cached(&self, signals: &SignalMatrix, cache: &mut NodeCache) -> Result<Trajectory> {
        let n = self.n_agents();
        check_signal_shape(signals, n, self.horizon)?;
        if cache.nodes.is_empty() {
            cache.nodes.push(self.root());
        }
        let mut traj = Trajectory::with_capacity(signals.clone());
        let mut counts = vec![0usize; n];
        let mut at = 0usize;
        for t in 0..self.horizon {
            Self::update_counts(signals, t, &mut counts);
            let bits = self.record(&cache.nodes[at], &counts, &mut traj);
            if t + 1 == self.horizon {
                break;
            }
            at = match cache.nodes[at].children.get(&bits) {
                Some(&next) => next as usize,
                None => {
                    if cache.nodes.len() >= cache.limit {
                        return self.play(signals);
                    }
                    let filters = self
                        .advance(&cache.nodes[at], bits)
                        .ok_or(Error::Unreachable { agent: 0, period: t })?;
                    let child = self.node(t + 1, filters);
                    let idx = cache.nodes.len();
                    cache.nodes.push(child);
                    cache.nodes[at].children.insert(bits, idx as u32);
                    idx
                }
            };
        }
        Ok(traj)
    }

    /// Exact per-state mistake probabilities by expanding every reachable
    /// action history. Returns `ln P[a^i_t != theta | theta]` indexed
    /// `[state][agent * horizon + period]` and the log total mass per state and period.
    pub fn exact_forward(&self, node_budget: u64) -> Result<([Vec<f64>; 2], [Vec<f64>; 2])> {
        let n = self.net.n_agents();
        let horizon = self.horizon;
        let mut log_mistake = [vec![f64::NEG_INFINITY; n * horizon], vec![f64::NEG_INFINITY; n * horizon]];
        let mut log_mass = [vec![f64::NEG_INFINITY; horizon], vec![f64::NEG_INFINITY; horizon]];
        let mut frontier = vec![self.root()];
        let mut nodes: u64 = 1;

        for t in 0..horizon {
            let mut mistakes = vec![[LogAcc::new(), LogAcc::new()]; n];
            let mut mass = [LogAcc::new(), LogAcc::new()];
            let mut next = Vec::new();
            for node in frontier.drain(..) {
                let node_log = [
                    node.filters.iter().map(|f| f.log_scale[0]).sum::<f64>(),
                    node.filters.iter().map(|f| f.log_scale[1]).sum::<f64>(),
                ];
                mass[0].add(node_log[0]);
                mass[1].add(node_log[1]);

                // feasible actions per agent, and mistake mass
                let mut options: Vec<Vec<Action>> = Vec::with_capacity(n);
                for (j, f) in node.filters.iter().enumerate() {
                    let mut opts = Vec::with_capacity(2);
                    for action in Label::BOTH {
                        let keep = |c: usize| node.plays_g(j, c) == (action == Label::G);
                        let m = [f.kept_mass(0, &keep), f.kept_mass(1, &keep)];
                        if m[0] > 0.0 || m[1] > 0.0 {
                            opts.push(action);
                        }
                        let wrong = action.flip().index();
                        mistakes[j][wrong].add(node_log[wrong] + m[wrong].ln());
                    }
                    options.push(opts);
                }
                if t + 1 == horizon {
                    continue;
                }
                let total: usize = options.iter().map(Vec::len).product();
                nodes = nodes.saturating_add(total as u64);
                if nodes > node_budget {
                    return Err(Error::Budget(format!(
                        "exact forward expansion for n={n}, T={horizon} exceeded {node_budget} history nodes at period {}",
                        t + 1
                    )));
                }
                for combo in 0..total {
                    let mut rem = combo;
                    let mut bits = 0u64;
                    for (j, opts) in options.iter().enumerate() {
                        bits |= opts[rem % opts.len()].bit() << j;
                        rem /= opts.len();
                    }
                    if let Some(filters) = self.advance(&node, bits) {
                        next.push(self.node(t + 1, filters));
                    }
                }
            }
            for s in 0..2 {
                log_mass[s][t] = mass[s].value();
            }
            for (j, m) in mistakes.iter().enumerate() {
                log_mistake[0][j * horizon + t] = m[0].value();
                log_mistake[1][j * horizon + t] = m[1].value();
            }
            frontier = next;
        }
        Ok((log_mistake, log_mass))
    }
}

struct Node {
    period: usize,
    /// own filter log ratio before this period
    ratio: Vec<f64>,
    /// sum of observed agents' log ratios (excluding self)
    social: Vec<f64>,
    /// `rule[j * (period + 2) + c]`: agent j with count c plays g
    rule: Vec<bool>,
    /// filters after predicting this period's signal
    filters: Vec<CountFilter>,
    children: HashMap<u64, u32>,
}

impl Node {
    #[inline]
    fn plays_g(&self, agent: usize, count: usize) -> bool {
        self.rule[agent * (self.period + 2) + count]
    }
}

/// Public-history nodes shared by many trials of one engine.
pub struct NodeCache {
    nodes: Vec<Node>,
    limit: usize,
}

impl NodeCache {
    pub fn new(limit: usize) -> Self {
        NodeCache { nodes: Vec::new(), limit }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

impl BeliefEngine for FilterEngine {
    fn kind(&self) -> EngineKind {
        match self.mode {
            FilterMode::Complete => EngineKind::Factorized,
            FilterMode::Star => EngineKind::Star,
        }
    }

    fn n_agents(&self) -> usize {
        self.net.n_agents()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn tie_rule(&self) -> TieRule {
        self.tie
    }

    fn play(&self, signals: &SignalMatrix) -> Result<Trajectory> {
        let n = self.n_agents();
        check_signal_shape(signals, n, self.horizon)?;
        let mut traj = Trajectory::with_capacity(signals.clone());
        let mut counts = vec![0usize; n];
        let mut node = self.root();
        for t in 0..self.horizon {
            Self::update_counts(signals, t, &mut counts);
            let bits = self.record(&node, &counts, &mut traj);
            if t + 1 < self.horizon {
                let filters = self.advance(&node, bits).ok_or(Error::Unreachable { agent: 0, period: t })?;
                node = self.node(t + 1, filters);
            }
        }
        Ok(traj)
    }

    fn scratch(&self) -> EngineScratch {
        // star histories rarely repeat: peripherals act on private signals only
        EngineScratch {
            nodes: (self.mode == FilterMode::Complete).then(|| NodeCache::new(DEFAULT_CACHE_NODES)),
        }
    }

    fn play_scratch(&self, signals: &SignalMatrix, scratch: &mut EngineScratch) -> Result<Trajectory> {
        match &mut scratch.nodes {
            Some(cache) => self.play_cached(signals, cache),
            None => self.play(signals),
        }
    }
}
