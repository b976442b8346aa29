//! Benchmark rates: the autarky rate, the universal bound `M`, and the exact
//! mistake curve of a lone agent.

use serde::{Deserialize, Serialize};

use crate::dynamics::{CurveMode, MistakeCurve};
use crate::error::{Error, Result};
use crate::logspace::{log_add_exp, LogAcc};
use crate::signal::SignalModel;

const GOLDEN_ITERS: usize = 200;
const GOLDEN_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateBounds {
    /// Autarky rate in nats per period.
    pub r_a: f64,
    /// Bound on any agent's rate, in nats per period.
    pub m: f64,
}

impl RateBounds {
    pub fn for_model(model: &SignalModel) -> Result<Self> {
        Ok(RateBounds {
            r_a: autarky_rate(model)?,
            m: model.bound_m(),
        })
    }

    /// Rate of an agent who sees all `n` agents' signals.
    pub fn public_benchmark(&self, n: usize) -> f64 {
        n as f64 * self.r_a
    }

    pub fn crossover_n(&self) -> Result<usize> {
        crossover_from(self.r_a, self.m)
    }
}

/// `-ln sum_w mu_g(w)^z mu_b(w)^(1-z)`.
fn chernoff_objective(g: &[f64], b: &[f64], z: f64) -> f64 {
    let mut acc = LogAcc::new();
    for (&pg, &pb) in g.iter().zip(b) {
        if pg > 0.0 && pb > 0.0 {
            acc.add(z * pg.ln() + (1.0 - z) * pb.ln());
        }
    }
    -acc.value()
}

/// Chernoff information between the two state-conditional signal distributions.
pub fn autarky_rate(model: &SignalModel) -> Result<f64> {
    let dist = model
        .stationary_dist()
        .ok_or_else(|| Error::InvalidSignal("autarky rate needs stationary signals".into()))?;
    let g = dist.probs(crate::signal::Label::G);
    let b = dist.probs(crate::signal::Label::B);
    if g == b {
        return Ok(0.0);
    }
    let f = |z: f64| chernoff_objective(g, b, z);

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_ITERS {
        if hi - lo < GOLDEN_TOL {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let best = f(0.5 * (lo + hi)).max(f1).max(f2).max(f(0.0)).max(f(1.0));
    Ok(best.max(0.0))
}

fn crossover_from(r_a: f64, m: f64) -> Result<usize> {
    if r_a <= 0.0 {
        return Err(Error::InvalidSignal("uninformative signals: r_a = 0, no crossover".into()));
    }
    let mut n = (m / r_a).floor().max(1.0) as usize;
    while n as f64 * r_a <= m {
        n += 1;
    }
    while n > 1 && (n - 1) as f64 * r_a > m {
        n -= 1;
    }
    Ok(n)
}

/// Smallest `n` with `n * r_a > M`.
pub fn crossover_n(model: &SignalModel) -> Result<usize> {
    RateBounds::for_model(model)?.crossover_n()
}

fn log_choose(n: usize, k: usize) -> f64 {
    fn ln_fact(m: usize) -> f64 {
        (1..=m).map(|x| (x as f64).ln()).sum()
    }
    ln_fact(n) - ln_fact(k) - ln_fact(n - k)
}

/// Exact mistake curve of a lone myopic agent with symmetric binary signals.
///
/// After `t` signals the agent plays g iff at least half of them are g, so
/// under g it errs when fewer than `t/2` are correct, and under b it errs when
/// at least `t/2` are wrong (the even split goes to g).
pub fn single_agent_exact_mistakes(model: &SignalModel, horizon: usize) -> Result<MistakeCurve> {
    let p = model
        .symmetric_accuracy()
        .filter(|_| model.is_stationary())
        .ok_or_else(|| Error::InvalidSignal("exact single-agent curve needs stationary symmetric binary signals".into()))?;
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut under_g = Vec::with_capacity(horizon);
    let mut under_b = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        // k = number of correct signals
        let term = |k: usize| log_choose(t, k) + k as f64 * lp + (t - k) as f64 * lq;
        let mut g = f64::NEG_INFINITY;
        let mut b = f64::NEG_INFINITY;
        for k in 0..=t {
            let wrong = t - k;
            if 2 * k < t {
                g = log_add_exp(g, term(k));
            }
            if 2 * wrong >= t {
                b = log_add_exp(b, term(k));
            }
        }
        under_g.push(g);
        under_b.push(b);
    }
    Ok(MistakeCurve::exact(CurveMode::Analytic, 1, horizon, [under_g, under_b]))
}
