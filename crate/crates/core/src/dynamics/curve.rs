//! Per-agent, per-period mistake probabilities.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logspace::log_add_exp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveMode {
    MonteCarlo,
    ExactForward,
    Analytic,
}

impl CurveMode {
    pub fn is_exact(self) -> bool {
        !matches!(self, CurveMode::MonteCarlo)
    }
}

/// Which trials a cell averages over: all, or those with the given state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    All,
    G,
    B,
}

impl Conditioning {
    pub const ALL: [Conditioning; 3] = [Conditioning::All, Conditioning::G, Conditioning::B];

    pub fn name(self) -> &'static str {
        match self {
            Conditioning::All => "all",
            Conditioning::G => "g",
            Conditioning::B => "b",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Conditioning::All),
            "g" => Ok(Conditioning::G),
            "b" => Ok(Conditioning::B),
            other => Err(Error::Table(format!("unknown state_conditioning `{other}`"))),
        }
    }

    fn states(self) -> &'static [usize] {
        match self {
            Conditioning::All => &[0, 1],
            Conditioning::G => &[0],
            Conditioning::B => &[1],
        }
    }
}

/// Histogram of per-trial mistake bit patterns (bit `t` set iff a mistake at
/// period `t`), per state and agent. Supports trial-level resampling.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MistakePatterns {
    /// `counts[state][agent]`: pattern -> number of trials.
    pub counts: [Vec<BTreeMap<u64, u64>>; 2],
}

impl MistakePatterns {
    pub fn new(n_agents: usize) -> Self {
        MistakePatterns {
            counts: [vec![BTreeMap::new(); n_agents], vec![BTreeMap::new(); n_agents]],
        }
    }

    pub fn add(&mut self, state: usize, agent: usize, pattern: u64, count: u64) {
        *self.counts[state][agent].entry(pattern).or_insert(0) += count;
    }

    pub fn merge(&mut self, other: &MistakePatterns) {
        for s in 0..2 {
            for (mine, theirs) in self.counts[s].iter_mut().zip(&other.counts[s]) {
                for (&k, &v) in theirs {
                    *mine.entry(k).or_insert(0) += v;
                }
            }
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["state", "agent", "pattern", "trials"]).map_err(table_err)?;
        for (s, name) in ["g", "b"].iter().enumerate() {
            for (agent, hist) in self.counts[s].iter().enumerate() {
                for (pattern, count) in hist {
                    w.write_record([name.to_string(), (agent + 1).to_string(), format!("{pattern:x}"), count.to_string()])
                        .map_err(table_err)?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("writing patterns", e))
    }

    pub fn read_csv<R: Read>(input: R, n_agents: usize) -> Result<Self> {
        let mut out = MistakePatterns::new(n_agents);
        let mut r = csv::Reader::from_reader(input);
        for rec in r.records() {
            let rec = rec.map_err(table_err)?;
            let state = match rec.get(0) {
                Some("g") => 0,
                Some("b") => 1,
                other => return Err(Error::Table(format!("bad pattern state {other:?}"))),
            };
            let agent: usize = parse_field(&rec, 1)?;
            if agent == 0 || agent > n_agents {
                return Err(Error::Table(format!("pattern agent {agent} out of range")));
            }
            let pattern = u64::from_str_radix(rec.get(2).unwrap_or(""), 16).map_err(|e| Error::Table(format!("bad pattern: {e}")))?;
            let count: u64 = parse_field(&rec, 3)?;
            out.add(state, agent - 1, pattern, count);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MistakeCurve {
    pub mode: CurveMode,
    n_agents: usize,
    horizon: usize,
    /// Monte Carlo mistake counts, `[state][agent * horizon + t]`.
    mistakes: [Vec<u64>; 2],
    /// Monte Carlo trials per state.
    trials: [u64; 2],
    /// Exact `ln P[mistake | state]`, `[state][agent * horizon + t]`.
    log_exact: Option<[Vec<f64>; 2]>,
    pub patterns: Option<MistakePatterns>,
}

impl MistakeCurve {
    pub fn from_counts(
        n_agents: usize,
        horizon: usize,
        mistakes: [Vec<u64>; 2],
        trials: [u64; 2],
        patterns: Option<MistakePatterns>,
    ) -> Self {
        assert_eq!(mistakes[0].len(), n_agents * horizon);
        assert_eq!(mistakes[1].len(), n_agents * horizon);
        MistakeCurve {
            mode: CurveMode::MonteCarlo,
            n_agents,
            horizon,
            mistakes,
            trials,
            log_exact: None,
            patterns,
        }
    }

    pub fn exact(mode: CurveMode, n_agents: usize, horizon: usize, log_exact: [Vec<f64>; 2]) -> Self {
        assert!(mode.is_exact());
        assert_eq!(log_exact[0].len(), n_agents * horizon);
        MistakeCurve {
            mode,
            n_agents,
            horizon,
            mistakes: [vec![0; n_agents * horizon], vec![0; n_agents * horizon]],
            trials: [0, 0],
            log_exact: Some(log_exact),
            patterns: None,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    fn slot(&self, agent: usize, t: usize) -> usize {
        agent * self.horizon + t
    }

    pub fn trials(&self, cond: Conditioning) -> u64 {
        cond.states().iter().map(|&s| self.trials[s]).sum()
    }

    pub fn mistakes(&self, cond: Conditioning, agent: usize, t: usize) -> u64 {
        let k = self.slot(agent, t);
        cond.states().iter().map(|&s| self.mistakes[s][k]).sum()
    }

    /// Exact `ln P[mistake]` under the conditioning (uniform prior for `All`).
    pub fn log_exact(&self, cond: Conditioning, agent: usize, t: usize) -> Option<f64> {
        let e = self.log_exact.as_ref()?;
        let k = self.slot(agent, t);
        Some(match cond {
            Conditioning::All => log_add_exp(e[0][k], e[1][k]) - std::f64::consts::LN_2,
            Conditioning::G => e[0][k],
            Conditioning::B => e[1][k],
        })
    }

    pub fn log_p_hat(&self, cond: Conditioning, agent: usize, t: usize) -> f64 {
        if let Some(l) = self.log_exact(cond, agent, t) {
            return l;
        }
        let trials = self.trials(cond);
        if trials == 0 {
            return f64::NAN;
        }
        (self.mistakes(cond, agent, t) as f64).ln() - (trials as f64).ln()
    }

    pub fn p_hat(&self, cond: Conditioning, agent: usize, t: usize) -> f64 {
        self.log_p_hat(cond, agent, t).exp()
    }

    /// Binomial standard error of `p_hat`; zero for exact curves.
    pub fn se(&self, cond: Conditioning, agent: usize, t: usize) -> f64 {
        if self.mode.is_exact() {
            return 0.0;
        }
        let n = self.trials(cond) as f64;
        let p = self.p_hat(cond, agent, t);
        (p * (1.0 - p) / n).sqrt()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["state_conditioning", "agent", "t", "mistakes", "trials", "p_hat", "log_p_hat", "se"];
        let exact = self.mode.is_exact();
        if exact {
            header.push("p_exact");
        }
        w.write_record(&header).map_err(table_err)?;
        for cond in Conditioning::ALL {
            for agent in 0..self.n_agents {
                for t in 0..self.horizon {
                    let mut row = vec![
                        cond.name().to_string(),
                        (agent + 1).to_string(),
                        (t + 1).to_string(),
                        self.mistakes(cond, agent, t).to_string(),
                        self.trials(cond).to_string(),
                        self.p_hat(cond, agent, t).to_string(),
                        self.log_p_hat(cond, agent, t).to_string(),
                        self.se(cond, agent, t).to_string(),
                    ];
                    if exact {
                        row.push(self.p_hat(cond, agent, t).to_string());
                    }
                    w.write_record(&row).map_err(table_err)?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("writing mistake curve", e))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers().map_err(table_err)?.clone();
        let exact = headers.iter().any(|h| h == "p_exact");
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(table_err)?;
            let cond = Conditioning::parse(rec.get(0).unwrap_or(""))?;
            let agent: usize = parse_field(&rec, 1)?;
            let t: usize = parse_field(&rec, 2)?;
            if agent == 0 || t == 0 {
                return Err(Error::Table("agent and t are 1-based".into()));
            }
            let mistakes: u64 = parse_field(&rec, 3)?;
            let trials: u64 = parse_field(&rec, 4)?;
            let log_p: f64 = parse_field(&rec, 6)?;
            rows.push((cond, agent - 1, t - 1, mistakes, trials, log_p));
        }
        let n = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        let horizon = rows.iter().map(|r| r.2 + 1).max().unwrap_or(0);
        if n == 0 {
            return Err(Error::Table("mistake curve has no rows".into()));
        }
        let mut seen = [vec![false; n * horizon], vec![false; n * horizon]];
        let mut mistakes = [vec![0; n * horizon], vec![0; n * horizon]];
        let mut log_exact = [vec![f64::NAN; n * horizon], vec![f64::NAN; n * horizon]];
        let mut trials = [None, None];
        for (cond, agent, t, m, tr, lp) in rows {
            let s = match cond {
                Conditioning::All => continue,
                Conditioning::G => 0,
                Conditioning::B => 1,
            };
            let k = agent * horizon + t;
            seen[s][k] = true;
            mistakes[s][k] = m;
            log_exact[s][k] = lp;
            match trials[s] {
                None => trials[s] = Some(tr),
                Some(x) if x != tr => return Err(Error::Table("inconsistent trial counts".into())),
                _ => {}
            }
        }
        if seen.iter().any(|v| v.iter().any(|x| !x)) {
            return Err(Error::Table("mistake curve is missing state-conditional rows".into()));
        }
        Ok(if exact {
            MistakeCurve::exact(CurveMode::ExactForward, n, horizon, log_exact)
        } else {
            MistakeCurve::from_counts(n, horizon, mistakes, [trials[0].unwrap_or(0), trials[1].unwrap_or(0)], None)
        })
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv_file(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

fn table_err(e: csv::Error) -> Error {
    Error::Table(e.to_string())
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(i).ok_or_else(|| Error::Table(format!("missing column {i}")))?;
    raw.parse().map_err(|e| Error::Table(format!("column {i} (`{raw}`): {e}")))
}
