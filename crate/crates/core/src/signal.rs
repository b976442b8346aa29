//! Conditional signal distributions.
//!
//! Agents and periods are 0-based throughout the library (period index 0 is
//! the 1-based `t = 1` of reports). A model carries a base distribution used for every
//! `(agent, period)` cell plus optional per-cell overrides; a model without
//! overrides is stationary.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Normalization tolerance for probability rows.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// A binary label: the world state and the actions share the alphabet {g, b}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "g")]
    G,
    #[serde(rename = "b")]
    B,
}

pub type WorldState = Label;
pub type Action = Label;

impl Label {
    pub const BOTH: [Label; 2] = [Label::G, Label::B];

    pub fn flip(self) -> Label {
        match self {
            Label::G => Label::B,
            Label::B => Label::G,
        }
    }

    /// 0 for g, 1 for b.
    #[inline]
    pub fn index(self) -> usize {
        match self {
            Label::G => 0,
            Label::B => 1,
        }
    }

    #[inline]
    pub fn from_bit(bit: bool) -> Label {
        if bit {
            Label::B
        } else {
            Label::G
        }
    }

    #[inline]
    pub fn bit(self) -> u64 {
        self.index() as u64
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::G => "g",
            Label::B => "b",
        })
    }
}

/// One finite signal distribution under both states.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalDist {
    alphabet: Vec<String>,
    prob: [Vec<f64>; 2],
    log_prob: [Vec<f64>; 2],
    cdf: [Vec<f64>; 2],
    llr: Vec<f64>,
}

impl SignalDist {
    pub fn new(alphabet: Vec<String>, dist_g: Vec<f64>, dist_b: Vec<f64>) -> Result<Self> {
        if alphabet.is_empty() {
            return Err(Error::InvalidSignal("empty alphabet".into()));
        }
        if alphabet.len() > u8::MAX as usize {
            return Err(Error::InvalidSignal(format!(
                "alphabet of {} symbols exceeds the 255-symbol limit",
                alphabet.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for sym in &alphabet {
            if !seen.insert(sym) {
                return Err(Error::InvalidSignal(format!("duplicate symbol `{sym}`")));
            }
        }
        let dist_g = normalize(&alphabet, dist_g, "dist_g")?;
        let dist_b = normalize(&alphabet, dist_b, "dist_b")?;
        for (k, sym) in alphabet.iter().enumerate() {
            if (dist_g[k] > 0.0) != (dist_b[k] > 0.0) {
                return Err(Error::InvalidSignal(format!(
                    "symbol `{sym}` has probability {} under g but {} under b; \
                     distributions must be mutually absolutely continuous",
                    dist_g[k], dist_b[k]
                )));
            }
        }
        let log_g: Vec<f64> = dist_g.iter().map(|p| p.ln()).collect();
        let log_b: Vec<f64> = dist_b.iter().map(|p| p.ln()).collect();
        let llr = log_g
            .iter()
            .zip(&log_b)
            .map(|(g, b)| if g.is_finite() { g - b } else { 0.0 })
            .collect();
        let cdf = |d: &[f64]| {
            let mut acc = 0.0;
            d.iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect::<Vec<_>>()
        };
        Ok(SignalDist {
            alphabet,
            cdf: [cdf(&dist_g), cdf(&dist_b)],
            prob: [dist_g, dist_b],
            log_prob: [log_g, log_b],
            llr,
        })
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.alphabet.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphabet.is_empty()
    }

    #[inline]
    pub fn prob(&self, state: Label, symbol: usize) -> f64 {
        self.prob[state.index()][symbol]
    }

    #[inline]
    pub fn log_prob(&self, state: Label, symbol: usize) -> f64 {
        self.log_prob[state.index()][symbol]
    }

    pub fn probs(&self, state: Label) -> &[f64] {
        &self.prob[state.index()]
    }

    #[inline]
    pub fn llr(&self, symbol: usize) -> f64 {
        self.llr[symbol]
    }

    pub fn symbol_index(&self, name: &str) -> Option<usize> {
        self.alphabet.iter().position(|s| s == name)
    }

    /// Largest |llr| over symbols with positive probability.
    pub fn max_abs_llr(&self) -> f64 {
        self.llr.iter().fold(0.0, |m, l| m.max(l.abs()))
    }

    fn sample<R: Rng>(&self, state: Label, rng: &mut R) -> u8 {
        let u: f64 = rng.random();
        let cdf = &self.cdf[state.index()];
        let k = cdf.iter().position(|&c| u < c).unwrap_or_else(|| {
            // u landed in the rounding gap above the last cdf entry
            self.prob[state.index()].iter().rposition(|&p| p > 0.0).unwrap_or(0)
        });
        k as u8
    }
}

fn normalize(alphabet: &[String], dist: Vec<f64>, name: &str) -> Result<Vec<f64>> {
    if dist.len() != alphabet.len() {
        return Err(Error::InvalidSignal(format!(
            "{name} has {} entries for an alphabet of {}",
            dist.len(),
            alphabet.len()
        )));
    }
    if let Some(bad) = dist.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidSignal(format!("{name} has invalid entry {bad}")));
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidSignal(format!(
            "{name} sums to {total}, not 1 within {NORMALIZATION_TOL:e}"
        )));
    }
    Ok(dist.into_iter().map(|p| p / total).collect())
}

/// Signal distributions for every agent and period.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalModel {
    base: SignalDist,
    overrides: BTreeMap<(usize, usize), SignalDist>,
    symmetric_p: Option<f64>,
}

impl SignalModel {
    /// Stationary model with one distribution for every cell.
    pub fn stationary(dist: SignalDist) -> Self {
        SignalModel {
            base: dist,
            overrides: BTreeMap::new(),
            symmetric_p: None,
        }
    }

    /// Binary signal equal to the state with probability `p`.
    pub fn symmetric_binary(p: f64) -> Result<Self> {
        if !(0.5..1.0).contains(&p) {
            return Err(Error::InvalidSignal(format!(
                "symmetric binary accuracy must lie in [0.5, 1), got {p}"
            )));
        }
        let dist = SignalDist::new(vec!["g".into(), "b".into()], vec![p, 1.0 - p], vec![1.0 - p, p])?;
        Ok(SignalModel {
            base: dist,
            overrides: BTreeMap::new(),
            symmetric_p: Some(p),
        })
    }

    /// Replace the distribution of one `(agent, period)` cell.
    pub fn with_override(mut self, agent: usize, period: usize, dist: SignalDist) -> Self {
        self.overrides.insert((agent, period), dist);
        self.symmetric_p = None;
        self
    }

    pub fn is_stationary(&self) -> bool {
        self.overrides.is_empty()
    }

    /// Accuracy `p` when this is a stationary symmetric binary model.
    pub fn symmetric_accuracy(&self) -> Option<f64> {
        self.symmetric_p
    }

    /// The stationary distribution, if any.
    pub fn stationary_dist(&self) -> Option<&SignalDist> {
        self.is_stationary().then_some(&self.base)
    }

    #[inline]
    pub fn dist(&self, agent: usize, period: usize) -> &SignalDist {
        if self.overrides.is_empty() {
            &self.base
        } else {
            self.overrides.get(&(agent, period)).unwrap_or(&self.base)
        }
    }

    pub fn alphabet_size(&self, agent: usize, period: usize) -> usize {
        self.dist(agent, period).len()
    }

    /// Per-signal log-likelihood ratio `ln(mu_g / mu_b)` in nats.
    pub fn llr(&self, agent: usize, period: usize, symbol: &str) -> Result<f64> {
        let dist = self.dist(agent, period);
        dist.symbol_index(symbol).map(|k| dist.llr(k)).ok_or_else(|| Error::UnknownSymbol {
            agent,
            period,
            symbol: symbol.to_string(),
        })
    }

    /// Twice the largest absolute per-signal LLR over every cell.
    pub fn bound_m(&self) -> f64 {
        let base = self.base.max_abs_llr();
        2.0 * self.overrides.values().fold(base, |m, d| m.max(d.max_abs_llr()))
    }

    /// Draw an `n x horizon` matrix under `theta`; agent `i` uses stream `i + 1` of `seed`.
    pub fn sample_signals(&self, theta: WorldState, n: usize, horizon: usize, seed: u64) -> SignalMatrix {
        let mut m = SignalMatrix::new(n, horizon);
        for i in 0..n {
            let mut rng = rng::agent_stream(seed, i);
            for t in 0..horizon {
                m.set(i, t, self.dist(i, t).sample(theta, &mut rng));
            }
        }
        m
    }

    /// Joint log-probability of a signal matrix prefix under `state`.
    pub fn log_prob_matrix(&self, state: Label, signals: &SignalMatrix, periods: usize) -> f64 {
        let mut lp = 0.0;
        for i in 0..signals.n_agents() {
            for t in 0..periods {
                lp += self.dist(i, t).log_prob(state, signals.get(i, t) as usize);
            }
        }
        lp
    }

    /// Swap the roles of g and b.
    pub fn mirrored(&self) -> Result<SignalModel> {
        let mirror = |d: &SignalDist| SignalDist::new(d.alphabet.clone(), d.prob[1].clone(), d.prob[0].clone());
        let mut out = SignalModel::stationary(mirror(&self.base)?);
        for (k, d) in &self.overrides {
            out.overrides.insert(*k, mirror(d)?);
        }
        Ok(out)
    }
}

/// Realized signals, one row per agent; entries are symbol indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignalMatrix {
    n: usize,
    horizon: usize,
    data: Vec<u8>,
}

impl SignalMatrix {
    pub fn new(n: usize, horizon: usize) -> Self {
        SignalMatrix {
            n,
            horizon,
            data: vec![0; n * horizon],
        }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Self {
        let n = rows.len();
        let horizon = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == horizon), "ragged signal rows");
        SignalMatrix {
            n,
            horizon,
            data: rows.concat(),
        }
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn get(&self, agent: usize, period: usize) -> u8 {
        self.data[agent * self.horizon + period]
    }

    #[inline]
    pub fn set(&mut self, agent: usize, period: usize, symbol: u8) {
        self.data[agent * self.horizon + period] = symbol;
    }

    pub fn row(&self, agent: usize) -> &[u8] {
        &self.data[agent * self.horizon..(agent + 1) * self.horizon]
    }

    /// Enumerate every matrix over per-cell alphabet sizes, agent-major, last cell fastest.
    pub fn enumerate(sizes: impl Fn(usize, usize) -> usize, n: usize, horizon: usize) -> Vec<SignalMatrix> {
        let cells: Vec<usize> = (0..n * horizon).map(|c| sizes(c / horizon, c % horizon)).collect();
        let total: usize = cells.iter().product();
        let mut out = Vec::with_capacity(total);
        let mut digits = vec![0u8; n * horizon];
        for _ in 0..total {
            out.push(SignalMatrix {
                n,
                horizon,
                data: digits.clone(),
            });
            for c in (0..digits.len()).rev() {
                digits[c] += 1;
                if (digits[c] as usize) < cells[c] {
                    break;
                }
                digits[c] = 0;
            }
        }
        out
    }
}
