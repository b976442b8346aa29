//! Enumeration engine for arbitrary networks.
//!
//! Period by period, every prefix of the signal matrix is enumerated. A prefix
//! of length `t + 1` fixes every action up to period `t - 1` (from maps built
//! earlier), so each agent's information set `(own signals, H^i_t)` is known;
//! the prefix's probability under each state is accumulated into that set, and
//! into the outside observer's set `H^i_t`. The posterior at each reachable set
//! then fixes the myopic action used by later periods.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::inference::{check_signal_shape, myopic_from_llr, BeliefEngine, BeliefState, EngineKind, TieRule, Trajectory};
use crate::logspace::LogAcc;
use crate::network::Network;
use crate::signal::{Action, Label, SignalMatrix, SignalModel};

/// Default cap on weighted enumeration steps (`sum_t n * #prefixes(t)`).
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 1 << 26;

/// Information-set key: (own signal code, observed action bits).
pub type InfoKey = (u64, u64);

#[derive(Clone, Copy, Debug)]
pub struct MapEntry {
    pub belief: BeliefState,
    pub action: Action,
}

/// Exact per-state mistake masses collected during construction.
#[derive(Clone, Debug)]
pub struct ExactMistakes {
    /// `ln P[a^i_t != theta | theta]`, indexed `[state][agent * horizon + period]`.
    pub log_mistake: [Vec<f64>; 2],
    /// `ln` of total enumerated mass per state and period (0 up to rounding).
    pub log_mass: [Vec<f64>; 2],
}

pub struct GenericEngine {
    net: Network,
    horizon: usize,
    tie: TieRule,
    /// `radix[i][t]` = product of agent i's alphabet sizes before period t.
    radix: Vec<Vec<u64>>,
    /// `maps[t][i]`: reachable information sets of agent i at period t.
    maps: Vec<Vec<HashMap<InfoKey, MapEntry>>>,
    exact: ExactMistakes,
    steps: u64,
}

struct Layout {
    n: usize,
    /// alphabet size per (period, agent)
    sizes: Vec<Vec<usize>>,
    /// number of prefixes of length t (index 0..=horizon)
    prefix_count: Vec<u64>,
    /// product of agent alphabet sizes within one period
    col_count: Vec<u64>,
    /// mixed-radix place of agent i inside a period column
    col_radix: Vec<Vec<u64>>,
}

impl Layout {
    fn new(model: &SignalModel, n: usize, horizon: usize) -> Self {
        let sizes: Vec<Vec<usize>> = (0..horizon).map(|t| (0..n).map(|i| model.alphabet_size(i, t)).collect()).collect();
        let mut col_count = Vec::with_capacity(horizon);
        let mut col_radix = Vec::with_capacity(horizon);
        for row in &sizes {
            let mut r = Vec::with_capacity(n);
            let mut acc = 1u64;
            for &s in row {
                r.push(acc);
                acc = acc.saturating_mul(s as u64);
            }
            col_radix.push(r);
            col_count.push(acc);
        }
        let mut prefix_count = vec![1u64];
        for &c in &col_count {
            let last = *prefix_count.last().unwrap();
            prefix_count.push(last.saturating_mul(c));
        }
        Layout {
            n,
            sizes,
            prefix_count,
            col_count,
            col_radix,
        }
    }

    /// Signal of agent i at period tau inside prefix x.
    #[inline]
    fn symbol(&self, x: u64, tau: usize, i: usize) -> usize {
        let col = (x / self.prefix_count[tau]) % self.col_count[tau];
        ((col / self.col_radix[tau][i]) % self.sizes[tau][i] as u64) as usize
    }

    fn steps(&self, horizon: usize) -> u64 {
        (1..=horizon).fold(0u64, |acc, t| {
            acc.saturating_add(self.prefix_count[t].saturating_mul(self.n as u64))
        })
    }
}

impl GenericEngine {
    pub fn build(model: &SignalModel, net: &Network, horizon: usize, tie: TieRule, budget: u64) -> Result<Self> {
        let n = net.n_agents();
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if n > 32 {
            return Err(Error::Budget(format!("generic engine supports at most 32 agents, got {n}")));
        }
        let layout = Layout::new(model, n, horizon);
        let steps = layout.steps(horizon);
        let max_alphabet = layout.sizes.iter().flatten().copied().max().unwrap_or(0);
        if steps > budget {
            return Err(Error::Budget(format!(
                "generic enumeration for n={n}, T={horizon}, |Omega|={max_alphabet} needs {steps} \
                 weighted steps, budget is {budget}"
            )));
        }
        for i in 0..n {
            let bits = net.neighbors(i).len() * horizon.saturating_sub(1);
            if bits > 64 {
                return Err(Error::Budget(format!(
                    "agent {i} observes {bits} action bits by T={horizon}; the generic engine keys at most 64"
                )));
            }
        }

        let radix: Vec<Vec<u64>> = (0..n)
            .map(|i| {
                let mut acc = 1u64;
                (0..horizon)
                    .map(|t| {
                        let r = acc;
                        acc = acc.saturating_mul(model.alphabet_size(i, t) as u64);
                        r
                    })
                    .collect()
            })
            .collect();

        // log-probability of each symbol, per (period, agent, state)
        let log_p = |t: usize, i: usize, state: Label, sym: usize| model.dist(i, t).log_prob(state, sym);

        // actions[t][x]: bitmask over agents (bit set = b) for prefix x of length t + 1
        let mut actions: Vec<Vec<u32>> = Vec::with_capacity(horizon);
        let mut maps = Vec::with_capacity(horizon);
        let mut log_mistake = [vec![f64::NEG_INFINITY; n * horizon], vec![f64::NEG_INFINITY; n * horizon]];
        let mut log_mass = [vec![f64::NEG_INFINITY; horizon], vec![f64::NEG_INFINITY; horizon]];

        for t in 0..horizon {
            let count = layout.prefix_count[t + 1];
            let mut sets: Vec<HashMap<InfoKey, [LogAcc; 2]>> = vec![HashMap::new(); n];
            let mut social: Vec<HashMap<u64, [LogAcc; 2]>> = vec![HashMap::new(); n];
            let mut keys = vec![(0u64, 0u64); n];

            let key_of = |x: u64, i: usize, actions: &[Vec<u32>]| -> InfoKey {
                let mut own = 0u64;
                for tau in 0..=t {
                    own += layout.symbol(x, tau, i) as u64 * radix[i][tau];
                }
                let obs = net.neighbors(i);
                let mut bits = 0u64;
                for (tau, acts) in actions.iter().enumerate().take(t) {
                    let mask = acts[(x % layout.prefix_count[tau + 1]) as usize];
                    for (k, &j) in obs.iter().enumerate() {
                        if mask >> j & 1 == 1 {
                            bits |= 1 << (tau * obs.len() + k);
                        }
                    }
                }
                (own, bits)
            };
            let weight = |x: u64| -> [f64; 2] {
                let mut w = [0.0; 2];
                for tau in 0..=t {
                    for i in 0..n {
                        let s = layout.symbol(x, tau, i);
                        w[0] += log_p(tau, i, Label::G, s);
                        w[1] += log_p(tau, i, Label::B, s);
                    }
                }
                w
            };

            let mut mass = [LogAcc::new(), LogAcc::new()];
            for x in 0..count {
                let w = weight(x);
                if w[0] == f64::NEG_INFINITY && w[1] == f64::NEG_INFINITY {
                    continue;
                }
                mass[0].add(w[0]);
                mass[1].add(w[1]);
                for (i, key) in keys.iter_mut().enumerate() {
                    *key = key_of(x, i, &actions);
                    let acc = sets[i].entry(*key).or_insert([LogAcc::new(), LogAcc::new()]);
                    acc[0].add(w[0]);
                    acc[1].add(w[1]);
                    let acc = social[i].entry(key.1).or_insert([LogAcc::new(), LogAcc::new()]);
                    acc[0].add(w[0]);
                    acc[1].add(w[1]);
                }
            }
            log_mass[0][t] = mass[0].value();
            log_mass[1][t] = mass[1].value();

            let period_maps: Vec<HashMap<InfoKey, MapEntry>> = sets
                .into_iter()
                .enumerate()
                .map(|(i, set)| {
                    set.into_iter()
                        .map(|(key, acc)| {
                            let (wg, wb) = (acc[0].value(), acc[1].value());
                            let soc = &social[i][&key.1];
                            let (sg, sb) = (soc[0].value(), soc[1].value());
                            let llr = wg - wb;
                            let s = sg - sb;
                            let p = (wg - sg) - (wb - sb);
                            let belief = BeliefState::new(llr, s, p);
                            (
                                key,
                                MapEntry {
                                    belief,
                                    action: myopic_from_llr(llr, tie),
                                },
                            )
                        })
                        .collect()
                })
                .collect();

            let mut acts = vec![0u32; count as usize];
            let mut mistakes: Vec<[LogAcc; 2]> = vec![[LogAcc::new(), LogAcc::new()]; n];
            for x in 0..count {
                let w = weight(x);
                if w[0] == f64::NEG_INFINITY && w[1] == f64::NEG_INFINITY {
                    continue;
                }
                let mut mask = 0u32;
                for i in 0..n {
                    let action = period_maps[i][&key_of(x, i, &actions)].action;
                    if action == Label::B {
                        mask |= 1 << i;
                        mistakes[i][0].add(w[0]);
                    } else {
                        mistakes[i][1].add(w[1]);
                    }
                }
                acts[x as usize] = mask;
            }
            for (i, m) in mistakes.iter().enumerate() {
                log_mistake[0][i * horizon + t] = m[0].value();
                log_mistake[1][i * horizon + t] = m[1].value();
            }
            actions.push(acts);
            maps.push(period_maps);
        }

        Ok(GenericEngine {
            net: net.clone(),
            horizon,
            tie,
            radix,
            maps,
            exact: ExactMistakes { log_mistake, log_mass },
            steps,
        })
    }

    pub fn exact_mistakes(&self) -> &ExactMistakes {
        &self.exact
    }

    pub fn enumeration_steps(&self) -> u64 {
        self.steps
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    /// Number of reachable information sets of `agent` at `period`.
    pub fn reachable_sets(&self, agent: usize, period: usize) -> usize {
        self.maps[period][agent].len()
    }

    /// Information-set key for `agent` at `period` from realized signals and actions.
    pub fn info_key(&self, agent: usize, period: usize, signals: &SignalMatrix, actions: impl Fn(usize, usize) -> Action) -> InfoKey {
        let own = (0..=period)
            .map(|tau| signals.get(agent, tau) as u64 * self.radix[agent][tau])
            .sum();
        let obs = self.net.neighbors(agent);
        let mut bits = 0u64;
        for tau in 0..period {
            for (k, &j) in obs.iter().enumerate() {
                if actions(j, tau) == Label::B {
                    bits |= 1 << (tau * obs.len() + k);
                }
            }
        }
        (own, bits)
    }

    /// Belief at a reachable information set; unreachable sets are an internal error.
    pub fn lookup(&self, agent: usize, period: usize, key: InfoKey) -> Result<&MapEntry> {
        self.maps[period][agent].get(&key).ok_or(Error::Unreachable { agent, period })
    }
}

impl BeliefEngine for GenericEngine {
    fn kind(&self) -> EngineKind {
        EngineKind::Generic
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
        for t in 0..self.horizon {
            for i in 0..n {
                let key = self.info_key(i, t, signals, |j, tau| traj.action(j, tau));
                let entry = *self.lookup(i, t, key)?;
                traj.record(i, t, entry.action, entry.belief);
            }
        }
        Ok(traj)
    }
}
