//! Learning-rate estimates from mistake curves, and the verdict against the
//! theoretical bounds.
//!
//! The rate of agent `i` is the decay rate of `P[a^i_t != theta]`, a liminf
//! that no finite horizon can certify. The estimate is a finite-window proxy:
//! the slope of `-ln P` against `t`. Deep-tail Monte Carlo cells are noisy, so
//! windows only use cells with at least `floor` mistakes, and early cells can
//! be trimmed (`skip_fraction`) to reduce pre-asymptotic bias from
//! polynomial prefactors.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::dynamics::{Conditioning, MistakeCurve};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::par;
use crate::rng;
use crate::theory::RateBounds;

pub const DEFAULT_FLOOR: u64 = 50;
pub const DEFAULT_RESAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RateMethod {
    #[default]
    OlsLog,
    Endpoint,
}

impl RateMethod {
    pub fn name(self) -> &'static str {
        match self {
            RateMethod::OlsLog => "ols_log",
            RateMethod::Endpoint => "endpoint",
        }
    }
}

/// How the fit window is chosen. Periods are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WindowPolicy {
    /// Longest contiguous run of cells with at least `floor` mistakes (Monte
    /// Carlo) or positive probability (exact). With `per_agent` false the run
    /// must qualify for every agent at once. The first `skip_fraction` of the
    /// run is dropped.
    Auto {
        #[serde(default = "default_floor")]
        floor: u64,
        #[serde(default)]
        skip_fraction: f64,
        #[serde(default)]
        per_agent: bool,
    },
    Fixed {
        t_min: usize,
        t_max: usize,
    },
}

fn default_floor() -> u64 {
    DEFAULT_FLOOR
}

impl Default for WindowPolicy {
    fn default() -> Self {
        WindowPolicy::Auto {
            floor: DEFAULT_FLOOR,
            skip_fraction: 0.0,
            per_agent: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateOptions {
    pub method: RateMethod,
    pub window: WindowPolicy,
    pub conditioning: Conditioning,
    pub resamples: usize,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for RateOptions {
    fn default() -> Self {
        RateOptions {
            method: RateMethod::OlsLog,
            window: WindowPolicy::default(),
            conditioning: Conditioning::All,
            resamples: DEFAULT_RESAMPLES,
            seed: 0,
            threads: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeMethod {
    /// Exact curve: no sampling error.
    Exact,
    /// Resampling whole trials from the mistake-pattern histogram.
    TrialBootstrap,
    /// Independent binomial resampling per cell; ignores correlation across t.
    CellBootstrap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// 1-based
    pub agent: usize,
    pub t_min: usize,
    pub t_max: usize,
    /// nats per period
    pub rate: f64,
    pub se: f64,
    pub se_method: SeMethod,
    pub r_squared: f64,
    /// Slope over the upper half of the window minus the full-window slope;
    /// positive when the decay is still accelerating.
    pub residual_trend: f64,
    pub method: RateMethod,
    /// resamples dropped because a cell had no mistakes
    pub dropped_resamples: usize,
}

/// Fit `-ln p` against `t` (1-based periods `ts`).
fn slope(method: RateMethod, ts: &[f64], neg_log_p: &[f64]) -> f64 {
    match method {
        RateMethod::Endpoint => {
            let k = ts.len() - 1;
            (neg_log_p[k] - neg_log_p[0]) / (ts[k] - ts[0])
        }
        RateMethod::OlsLog => ols(ts, neg_log_p).0,
    }
}

/// (slope, intercept, r^2)
fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let b = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (b, my - b * mx, r2)
}

fn cell_ok(curve: &MistakeCurve, cond: Conditioning, agent: usize, t: usize, floor: u64) -> bool {
    if curve.mode.is_exact() {
        curve.log_p_hat(cond, agent, t).is_finite()
    } else {
        curve.mistakes(cond, agent, t) >= floor
    }
}

/// Resolve a window policy for `agent` (0-based) to a 1-based `[t_min, t_max]`.
pub fn select_window(curve: &MistakeCurve, agent: usize, policy: WindowPolicy, cond: Conditioning) -> Result<(usize, usize)> {
    match policy {
        WindowPolicy::Fixed { t_min, t_max } => {
            if t_min == 0 || t_min >= t_max || t_max > curve.horizon() {
                return Err(Error::Estimation(format!(
                    "window [{t_min}, {t_max}] is not a valid range within 1..={}",
                    curve.horizon()
                )));
            }
            Ok((t_min, t_max))
        }
        WindowPolicy::Auto {
            floor,
            skip_fraction,
            per_agent,
        } => {
            let agents: Vec<usize> = if per_agent { vec![agent] } else { (0..curve.n_agents()).collect() };
            let good = |t: usize| agents.iter().all(|&a| cell_ok(curve, cond, a, t, floor));
            let (mut best, mut run_start) = (None::<(usize, usize)>, None);
            for t in 0..=curve.horizon() {
                if t < curve.horizon() && good(t) {
                    run_start.get_or_insert(t);
                } else if let Some(s) = run_start.take() {
                    if best.is_none_or(|(a, b)| t - s > b - a + 1) {
                        best = Some((s, t - 1));
                    }
                }
            }
            let (lo, hi) =
                best.ok_or_else(|| Error::Estimation(format!("no cells with at least {floor} mistakes for agent {}", agent + 1)))?;
            let skip = ((hi - lo) as f64 * skip_fraction.clamp(0.0, 1.0)).floor() as usize;
            let lo = (lo + skip).min(hi.saturating_sub(1));
            if lo >= hi {
                return Err(Error::Estimation(format!(
                    "window for agent {} has fewer than two qualifying periods",
                    agent + 1
                )));
            }
            Ok((lo + 1, hi + 1))
        }
    }
}

/// Estimate agent `agent`'s (0-based) rate.
pub fn estimate_rate(curve: &MistakeCurve, agent: usize, opts: &RateOptions) -> Result<RateEstimate> {
    if agent >= curve.n_agents() {
        return Err(Error::Estimation(format!("agent {} not in curve", agent + 1)));
    }
    let cond = opts.conditioning;
    let (t_min, t_max) = select_window(curve, agent, opts.window, cond)?;
    let ts: Vec<f64> = (t_min..=t_max).map(|t| t as f64).collect();
    let mut y = Vec::with_capacity(ts.len());
    for t in t_min..=t_max {
        let l = curve.log_p_hat(cond, agent, t - 1);
        if !l.is_finite() {
            return Err(Error::Estimation(format!("agent {} has no mistakes at t={t}", agent + 1)));
        }
        y.push(-l);
    }
    let rate = slope(opts.method, &ts, &y);
    let (_, _, r_squared) = ols(&ts, &y);
    let half = ts.len() / 2;
    let residual_trend = if ts.len() - half >= 2 {
        ols(&ts[half..], &y[half..]).0 - ols(&ts, &y).0
    } else {
        0.0
    };

    let (se, se_method, dropped) = if curve.mode.is_exact() {
        (0.0, SeMethod::Exact, 0)
    } else {
        bootstrap_se(curve, agent, cond, t_min, t_max, opts)
    };
    Ok(RateEstimate {
        agent: agent + 1,
        t_min,
        t_max,
        rate,
        se,
        se_method,
        r_squared,
        residual_trend,
        method: opts.method,
        dropped_resamples: dropped,
    })
}

/// Estimate every agent's rate. Agents whose curve has no usable window
/// (typically because mistakes vanish too quickly) are returned separately
/// with the reason.
pub fn estimate_all(curve: &MistakeCurve, opts: &RateOptions) -> Result<(Vec<RateEstimate>, Vec<(usize, String)>)> {
    let mut ok = Vec::new();
    let mut missing = Vec::new();
    for i in 0..curve.n_agents() {
        match estimate_rate(curve, i, opts) {
            Ok(e) => ok.push(e),
            Err(Error::Estimation(msg)) => missing.push((i + 1, msg)),
            Err(e) => return Err(e),
        }
    }
    if ok.is_empty() {
        let reasons: Vec<String> = missing.into_iter().map(|m| m.1).collect();
        return Err(Error::Estimation(reasons.join("; ")));
    }
    Ok((ok, missing))
}

/// Multinomial draw of `n` items over `weights` via sequential binomials.
fn multinomial(rng: &mut ChaCha8Rng, n: u64, weights: &[u64]) -> Vec<u64> {
    let mut left_n = n;
    let mut left_w: u64 = weights.iter().sum();
    let mut out = Vec::with_capacity(weights.len());
    for &w in weights {
        let x = if left_n == 0 || w == 0 {
            0
        } else if w >= left_w {
            left_n
        } else {
            Binomial::new(left_n, w as f64 / left_w as f64).expect("valid binomial").sample(rng)
        };
        out.push(x);
        left_n -= x;
        left_w -= w;
    }
    out
}

fn bootstrap_se(
    curve: &MistakeCurve,
    agent: usize,
    cond: Conditioning,
    t_min: usize,
    t_max: usize,
    opts: &RateOptions,
) -> (f64, SeMethod, usize) {
    let width = t_max - t_min + 1;
    let states: &[usize] = match cond {
        Conditioning::All => &[0, 1],
        Conditioning::G => &[0],
        Conditioning::B => &[1],
    };
    let state_cond = [Conditioning::G, Conditioning::B];
    let ts: Vec<f64> = (t_min..=t_max).map(|t| t as f64).collect();
    let total_trials = curve.trials(cond) as f64;

    // per state: histogram of window-restricted patterns
    let hists: Option<Vec<(u64, Vec<u64>, Vec<u64>)>> = curve.patterns.as_ref().map(|p| {
        states
            .iter()
            .map(|&s| {
                let mask = if width >= 64 { u64::MAX } else { (1u64 << width) - 1 };
                let mut h: BTreeMap<u64, u64> = BTreeMap::new();
                for (&pat, &c) in &p.counts[s][agent] {
                    *h.entry((pat >> (t_min - 1)) & mask).or_insert(0) += c;
                }
                let n = curve.trials(state_cond[s]);
                let (keys, counts): (Vec<u64>, Vec<u64>) = h.into_iter().unzip();
                (n, keys, counts)
            })
            .collect()
    });
    let se_method = if hists.is_some() {
        SeMethod::TrialBootstrap
    } else {
        SeMethod::CellBootstrap
    };

    let one = |_: &mut (), r: usize| -> Vec<(usize, Option<f64>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(rng::derive_seed(opts.seed, r as u64 + 1));
        let mut mistakes = vec![0u64; width];
        match &hists {
            Some(hists) => {
                for (n, keys, counts) in hists {
                    for (key, draws) in keys.iter().zip(multinomial(&mut rng, *n, counts)) {
                        if draws > 0 {
                            for (k, m) in mistakes.iter_mut().enumerate() {
                                if key >> k & 1 == 1 {
                                    *m += draws;
                                }
                            }
                        }
                    }
                }
            }
            None => {
                for (k, m) in mistakes.iter_mut().enumerate() {
                    let t = t_min - 1 + k;
                    for &s in states {
                        let n = curve.trials(state_cond[s]);
                        let p = curve.p_hat(state_cond[s], agent, t);
                        if n > 0 && p > 0.0 {
                            *m += Binomial::new(n, p.min(1.0)).expect("valid binomial").sample(&mut rng);
                        }
                    }
                }
            }
        }
        if mistakes.contains(&0) {
            return vec![(r, None)];
        }
        let y: Vec<f64> = mistakes.iter().map(|&m| -((m as f64).ln() - total_trials.ln())).collect();
        vec![(r, Some(slope(opts.method, &ts, &y)))]
    };
    let mut draws = par::map_reduce(
        opts.resamples,
        opts.threads,
        || (),
        one,
        Vec::new,
        |mut a, mut b| {
            a.append(&mut b);
            a
        },
    );
    draws.sort_by_key(|d| d.0);
    let slopes: Vec<f64> = draws.iter().filter_map(|d| d.1).collect();
    let dropped = draws.len() - slopes.len();
    if slopes.len() < 2 {
        return (f64::INFINITY, se_method, dropped);
    }
    let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let var = slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (slopes.len() - 1) as f64;
    (var.sqrt(), se_method, dropped)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub pass: bool,
    /// 1-based agents that fail
    pub failing: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpreadCheck {
    pub pass: bool,
    /// max rate - min rate
    pub spread: f64,
    /// 2 * joint standard error of the extreme pair
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentVerdict {
    pub agent: usize,
    pub rate: f64,
    pub se: f64,
    pub t_min: usize,
    pub t_max: usize,
    pub below_m: bool,
    /// rate / r_a
    pub vs_autarky: f64,
    /// rate / (n r_a)
    pub vs_public: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub n_agents: usize,
    pub m: f64,
    pub r_a: f64,
    pub public_benchmark: f64,
    /// whether `n r_a` exceeds `M`, i.e. whether the bound binds
    pub bound_binds: bool,
    pub strongly_connected: bool,
    /// 1-based sink components
    pub sink_components: Vec<Vec<usize>>,
    /// every rate <= M + 2 se (strongly connected networks only)
    pub theorem1: Option<BoundCheck>,
    /// spread of rates within 2 joint se (strongly connected networks only)
    pub equal_rates: Option<SpreadCheck>,
    /// min rate <= M + 2 se
    pub proposition1: BoundCheck,
    pub agents: Vec<AgentVerdict>,
    /// 1-based agents without an estimate (no usable window)
    pub unestimated: Vec<usize>,
    pub pass: bool,
}

/// Compare per-agent estimates against `M`, `r_a` and `n r_a`.
///
/// Agents missing from `estimates` are listed as unestimated. The minimum
/// over estimated agents still bounds the overall minimum from above when
/// the missing agents are the ones whose mistakes vanish fastest; on a
/// strongly connected network any missing agent makes the verdict fail.
pub fn compare_to_bounds(estimates: &[RateEstimate], bounds: &RateBounds, net: &Network) -> Result<Verdict> {
    let n = net.n_agents();
    let mut covered = vec![false; n];
    for e in estimates {
        if e.agent == 0 || e.agent > n || std::mem::replace(&mut covered[e.agent - 1], true) {
            return Err(Error::Estimation(format!(
                "estimate for agent {} is out of range or repeated",
                e.agent
            )));
        }
    }
    if estimates.is_empty() {
        return Err(Error::Estimation("no rate estimates".into()));
    }
    let unestimated: Vec<usize> = (1..=n).filter(|&i| !covered[i - 1]).collect();
    let m = bounds.m;
    let below = |e: &RateEstimate| e.rate <= m + 2.0 * e.se;
    let agents: Vec<AgentVerdict> = estimates
        .iter()
        .map(|e| AgentVerdict {
            agent: e.agent,
            rate: e.rate,
            se: e.se,
            t_min: e.t_min,
            t_max: e.t_max,
            below_m: below(e),
            vs_autarky: e.rate / bounds.r_a,
            vs_public: e.rate / bounds.public_benchmark(n),
        })
        .collect();
    let strongly_connected = net.is_strongly_connected();
    let (theorem1, equal_rates) = if strongly_connected {
        let failing: Vec<usize> = estimates.iter().filter(|e| !below(e)).map(|e| e.agent).collect();
        let hi = estimates.iter().max_by(|a, b| a.rate.total_cmp(&b.rate)).expect("non-empty");
        let lo = estimates.iter().min_by(|a, b| a.rate.total_cmp(&b.rate)).expect("non-empty");
        let spread = hi.rate - lo.rate;
        let slack = 2.0 * (hi.se.powi(2) + lo.se.powi(2)).sqrt();
        (
            Some(BoundCheck {
                pass: failing.is_empty(),
                failing,
            }),
            Some(SpreadCheck {
                pass: spread <= slack,
                spread,
                slack,
            }),
        )
    } else {
        (None, None)
    };
    let min = estimates.iter().min_by(|a, b| a.rate.total_cmp(&b.rate)).expect("non-empty");
    let proposition1 = BoundCheck {
        pass: below(min),
        failing: if below(min) { vec![] } else { vec![min.agent] },
    };
    let pass = proposition1.pass
        && theorem1.as_ref().is_none_or(|c| c.pass)
        && equal_rates.as_ref().is_none_or(|c| c.pass)
        && !(strongly_connected && !unestimated.is_empty());
    Ok(Verdict {
        n_agents: n,
        m,
        r_a: bounds.r_a,
        public_benchmark: bounds.public_benchmark(n),
        bound_binds: bounds.public_benchmark(n) > m,
        strongly_connected,
        sink_components: net
            .sink_components()
            .into_iter()
            .map(|c| c.into_iter().map(|i| i + 1).collect())
            .collect(),
        theorem1,
        equal_rates,
        proposition1,
        agents,
        unestimated,
        pass,
    })
}

impl Verdict {
    /// Plain-text report.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let ok = |b: bool| if b { "pass" } else { "FAIL" };
        s += &format!(
            "agents: {}  M = {:.5}  r_a = {:.5}  n*r_a = {:.5}\n",
            self.n_agents, self.m, self.r_a, self.public_benchmark
        );
        s += &format!("strongly connected: {}\n", self.strongly_connected);
        s += &format!("sink components: {:?}\n", self.sink_components);
        s += "agent  window      rate      se        rate/r_a  rate/(n*r_a)  <= M+2se\n";
        for a in &self.agents {
            s += &format!(
                "{:<6} [{:>3},{:>3}]  {:<9.5} {:<9.5} {:<9.3} {:<13.3} {}\n",
                a.agent,
                a.t_min,
                a.t_max,
                a.rate,
                a.se,
                a.vs_autarky,
                a.vs_public,
                if a.below_m { "yes" } else { "no" }
            );
        }
        if !self.unestimated.is_empty() {
            s += &format!("no usable window (mistakes vanish too fast): agents {:?}\n", self.unestimated);
        }
        if let Some(c) = &self.theorem1 {
            s += &format!("every rate <= M + 2se: {}\n", ok(c.pass));
        }
        if let Some(c) = &self.equal_rates {
            s += &format!("equal rates (spread {:.5} <= {:.5}): {}\n", c.spread, c.slack, ok(c.pass));
        }
        s += &format!("min rate <= M + 2se: {}\n", ok(self.proposition1.pass));
        if !self.bound_binds {
            s += "note: n*r_a < M, so the public benchmark is the tighter comparison\n";
        }
        s += &format!("verdict: {}\n", ok(self.pass));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{CurveMode, MistakePatterns};
    use crate::network::Topology;
    use crate::signal::SignalModel;
    use crate::theory::single_agent_exact_mistakes;

    fn exact_opts(t_min: usize, t_max: usize, method: RateMethod) -> RateOptions {
        RateOptions {
            method,
            window: WindowPolicy::Fixed { t_min, t_max },
            ..Default::default()
        }
    }

    #[test]
    fn synthetic_exponential_is_exact() {
        let rho = 0.37;
        let log: Vec<f64> = (1..=30).map(|t| 0.2f64.ln() - rho * t as f64).collect();
        let c = MistakeCurve::exact(CurveMode::Analytic, 1, 30, [log.clone(), log]);
        for method in [RateMethod::OlsLog, RateMethod::Endpoint] {
            let e = estimate_rate(&c, 0, &exact_opts(3, 25, method)).unwrap();
            assert!((e.rate - rho).abs() < 1e-12);
            assert_eq!(e.se, 0.0);
            assert!((e.r_squared - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_agent_slope_near_chernoff() {
        let model = SignalModel::symmetric_binary(0.9).unwrap();
        let c = single_agent_exact_mistakes(&model, 200).unwrap();
        let r_a = crate::theory::autarky_rate(&model).unwrap();
        let ols = estimate_rate(&c, 0, &exact_opts(50, 200, RateMethod::OlsLog)).unwrap();
        let end = estimate_rate(&c, 0, &exact_opts(50, 200, RateMethod::Endpoint)).unwrap();
        assert!((ols.rate / r_a - 1.0).abs() < 0.02);
        assert!((ols.rate / end.rate - 1.0).abs() < 0.01);
    }

    #[test]
    fn auto_window_takes_longest_run() {
        let counts = vec![500, 20, 300, 200, 120, 60, 20, 0];
        let c = MistakeCurve::from_counts(1, 8, [counts.clone(), counts], [1000, 1000], None);
        let w = select_window(&c, 0, WindowPolicy::default(), Conditioning::All).unwrap();
        assert_eq!(w, (3, 6));
        let skip = WindowPolicy::Auto {
            floor: 50,
            skip_fraction: 0.5,
            per_agent: true,
        };
        assert_eq!(select_window(&c, 0, skip, Conditioning::All).unwrap(), (4, 6));
        let none = WindowPolicy::Auto {
            floor: 10_000,
            skip_fraction: 0.0,
            per_agent: true,
        };
        assert!(matches!(select_window(&c, 0, none, Conditioning::All), Err(Error::Estimation(_))));
    }

    #[test]
    fn estimate_invariant_to_trial_scaling() {
        let m = vec![4000, 1500, 600, 220, 90];
        let a = MistakeCurve::from_counts(1, 5, [m.clone(), m.clone()], [10_000, 10_000], None);
        let m10: Vec<u64> = m.iter().map(|x| x * 10).collect();
        let b = MistakeCurve::from_counts(1, 5, [m10.clone(), m10], [100_000, 100_000], None);
        let opts = RateOptions {
            resamples: 50,
            ..Default::default()
        };
        let (x, y) = (estimate_rate(&a, 0, &opts).unwrap(), estimate_rate(&b, 0, &opts).unwrap());
        assert!((x.rate - y.rate).abs() < 1e-12);
        assert!(y.se < x.se);
        assert_eq!(x.se_method, SeMethod::CellBootstrap);
    }

    #[test]
    fn trial_bootstrap_uses_patterns() {
        // perfectly correlated cells: a trial errs at t=1..k for a random k
        let mut pat = MistakePatterns::new(1);
        let mut counts = [vec![0u64; 4], vec![0u64; 4]];
        for (k, trials) in [(0u32, 6000u64), (1, 2400), (2, 1000), (3, 400), (4, 200)] {
            for s in 0..2 {
                pat.add(s, 0, (1u64 << k) - 1, trials);
                for t in 0..k as usize {
                    counts[s][t] += trials;
                }
            }
        }
        let c = MistakeCurve::from_counts(1, 4, counts, [10_000, 10_000], Some(pat));
        let opts = RateOptions {
            resamples: 200,
            seed: 5,
            ..Default::default()
        };
        let e = estimate_rate(&c, 0, &opts).unwrap();
        assert_eq!(e.se_method, SeMethod::TrialBootstrap);
        assert!(e.se > 0.0 && e.se < 0.1);
        assert_eq!(estimate_rate(&c, 0, &opts).unwrap(), e);
    }

    #[test]
    fn verdict_flags_fast_agent() {
        let bounds = RateBounds { r_a: 0.5, m: 2.0 };
        let net = Network::make(Topology::Complete, 2, None).unwrap();
        let est = |agent, rate| RateEstimate {
            agent,
            t_min: 1,
            t_max: 5,
            rate,
            se: 0.1,
            se_method: SeMethod::Exact,
            r_squared: 1.0,
            residual_trend: 0.0,
            method: RateMethod::OlsLog,
            dropped_resamples: 0,
        };
        let v = compare_to_bounds(&[est(1, 1.0), est(2, 1.05)], &bounds, &net).unwrap();
        assert!(v.pass);
        let v = compare_to_bounds(&[est(1, 1.0), est(2, 2.5)], &bounds, &net).unwrap();
        assert!(!v.pass);
        assert_eq!(v.theorem1.as_ref().unwrap().failing, vec![2]);
        assert!(!v.equal_rates.as_ref().unwrap().pass);
        assert!(v.proposition1.pass);
        assert!(v.render().contains("verdict: FAIL"));

        // strongly connected with a missing agent cannot pass
        let v = compare_to_bounds(&[est(1, 1.0)], &bounds, &net).unwrap();
        assert_eq!(v.unestimated, vec![2]);
        assert!(!v.pass);
        let star = Network::make(Topology::Star, 2, None).unwrap();
        let v = compare_to_bounds(&[est(2, 0.5)], &bounds, &star).unwrap();
        assert!(v.pass);
        assert!(compare_to_bounds(&[est(2, 0.5), est(2, 0.6)], &bounds, &star).is_err());
    }
}
