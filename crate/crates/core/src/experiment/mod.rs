//! Config-driven experiments and their on-disk result bundles.
//!
//! A run directory holds:
//!
//! | file | content |
//! |---|---|
//! | `config.toml` | the effective configuration |
//! | `summary.jsonl` | one record: config hash, seed, engine, invariant status |
//! | `mistakes.csv` | the mistake curve |
//! | `patterns.csv` | per-trial mistake pattern histogram (Monte Carlo, `T <= 64`) |
//! | `rates.csv` | per-agent rate estimates |
//! | `verdict.json`, `verdict.txt` | comparison with `M`, `r_a` and `n r_a` |
//! | `neg_log_p.csv` | plot series `t` vs `-ln P[mistake]` |
//! | `social_paths.csv` | plot series `t` vs `S_t / t` for the first trials |
//! | `violations.json` | invariant violations, if any |

mod config;

pub use config::{ExperimentConfig, NetworkSpec, RateConfig, RunMode, SignalOverride, SignalSpec, PRESETS};

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{run_exact_forward, run_monte_carlo, Conditioning, McOptions, MistakeCurve, SamplePath, ViolationReport};
use crate::error::{Error, Result};
use crate::inference::{resolve_engine, EngineKind};
use crate::rates::{compare_to_bounds, estimate_all, RateEstimate, RateOptions, Verdict};
use crate::rng;
use crate::signal::SignalModel;
use crate::theory::RateBounds;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; never affects results.
    pub threads: Option<usize>,
}

/// `M`, `r_a`, `n r_a` and the crossover size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsRecord {
    pub m: f64,
    pub r_a: Option<f64>,
    pub public_benchmark: Option<f64>,
    pub crossover_n: Option<usize>,
}

pub fn bounds_record(model: &SignalModel, n: usize) -> BoundsRecord {
    match RateBounds::for_model(model) {
        Ok(b) => BoundsRecord {
            m: b.m,
            r_a: Some(b.r_a),
            public_benchmark: Some(b.public_benchmark(n)),
            crossover_n: b.crossover_n().ok(),
        },
        Err(_) => BoundsRecord {
            m: model.bound_m(),
            r_a: None,
            public_benchmark: None,
            crossover_n: None,
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub seed: u64,
    pub mode: RunMode,
    pub engine: EngineKind,
    pub n_agents: usize,
    pub horizon: usize,
    pub trials: Option<u64>,
    pub invariant_status: String,
    pub violations: u64,
    pub bounds: BoundsRecord,
    pub verdict_pass: Option<bool>,
    pub rate_error: Option<String>,
    pub out: PathBuf,
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Table(e.to_string())
}

pub fn write_rates_csv(path: &Path, estimates: &[RateEstimate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for e in estimates {
        w.serialize(e).map_err(csv_err)?;
    }
    if estimates.is_empty() {
        w.write_record([
            "agent",
            "t_min",
            "t_max",
            "rate",
            "se",
            "se_method",
            "r_squared",
            "residual_trend",
            "method",
            "dropped_resamples",
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("writing rates", e))
}

fn write_series(dir: &Path, curve: &MistakeCurve, paths: &[SamplePath]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(&dir.join("neg_log_p.csv"))?);
    w.write_record(["agent", "t", "neg_log_p_hat"]).map_err(csv_err)?;
    for i in 0..curve.n_agents() {
        for t in 0..curve.horizon() {
            let v = -curve.log_p_hat(Conditioning::All, i, t);
            w.write_record([(i + 1).to_string(), (t + 1).to_string(), v.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io("writing series", e))?;

    let mut w = csv::Writer::from_writer(create(&dir.join("social_paths.csv"))?);
    w.write_record(["trial", "theta", "agent", "t", "social_over_t"]).map_err(csv_err)?;
    for p in paths {
        for (i, row) in p.social_rate.iter().enumerate() {
            for (t, v) in row.iter().enumerate() {
                w.write_record([
                    p.trial.to_string(),
                    p.theta.to_string(),
                    (i + 1).to_string(),
                    (t + 1).to_string(),
                    v.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("writing sample paths", e))
}

/// Rate estimates and verdict for a curve; used by `run` and `rates`.
pub fn analyze(curve: &MistakeCurve, cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Analysis> {
    let model = cfg.signal.build()?;
    let net = cfg.network.build()?;
    if curve.n_agents() != net.n_agents() {
        return Err(Error::Config(format!(
            "curve has {} agents, network has {}",
            curve.n_agents(),
            net.n_agents()
        )));
    }
    let opts = RateOptions {
        method: cfg.rates.method,
        window: cfg.window,
        conditioning: Conditioning::All,
        resamples: cfg.rates.resamples,
        seed: rng::derive_seed(cfg.seed, 0x7261_7465),
        threads,
    };
    let (estimates, unestimated) = estimate_all(curve, &opts)?;
    let verdict = match RateBounds::for_model(&model) {
        Ok(bounds) if bounds.r_a > 0.0 => Some(compare_to_bounds(&estimates, &bounds, &net)?),
        _ => None,
    };
    Ok(Analysis {
        estimates,
        unestimated,
        verdict,
    })
}

pub struct Analysis {
    pub estimates: Vec<RateEstimate>,
    /// 1-based agent and reason
    pub unestimated: Vec<(usize, String)>,
    pub verdict: Option<Verdict>,
}

/// Write a verdict as JSON and text.
pub fn write_verdict(dir: &Path, verdict: &Verdict) -> Result<()> {
    write_json(&dir.join("verdict.json"), verdict)?;
    write_text(&dir.join("verdict.txt"), &verdict.render())
}

/// Run a configured experiment and write its bundle to `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    cfg.validate()?;
    let model = cfg.signal.build()?;
    let net = cfg.network.build()?;
    let engine = resolve_engine(cfg.engine, &model, &net)?;
    let dir = &cfg.out;
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    write_text(&dir.join("config.toml"), &cfg.to_toml()?)?;

    let (curve, paths, violations, trials) = match cfg.mode {
        RunMode::MonteCarlo => {
            let mc = McOptions {
                trials: cfg.trials,
                seed: cfg.seed,
                threads: opts.threads,
                collect_violations: cfg.collect_violations,
                sample_paths: cfg.sample_paths,
                patterns: true,
                enumeration_budget: cfg.budget,
            };
            match run_monte_carlo(&model, &net, cfg.horizon, cfg.engine, &mc) {
                Ok(out) => (out.curve, out.sample_paths, out.violations, Some(cfg.trials)),
                Err(Error::Invariant(report)) => {
                    write_json(&dir.join("violations.json"), &report)?;
                    return Err(Error::Invariant(report));
                }
                Err(e) => return Err(e),
            }
        }
        RunMode::ExactForward => (
            run_exact_forward(&model, &net, cfg.horizon, cfg.engine, cfg.budget)?,
            Vec::new(),
            ViolationReport::default(),
            None,
        ),
    };
    if !violations.is_clean() {
        write_json(&dir.join("violations.json"), &violations)?;
    }
    curve.write_csv_file(&dir.join("mistakes.csv"))?;
    if let Some(p) = &curve.patterns {
        p.write_csv(create(&dir.join("patterns.csv"))?)?;
    }
    write_series(dir, &curve, &paths)?;

    let (verdict_pass, rate_error) = match analyze(&curve, cfg, opts.threads) {
        Ok(a) => {
            write_rates_csv(&dir.join("rates.csv"), &a.estimates)?;
            if let Some(v) = &a.verdict {
                write_verdict(dir, v)?;
            }
            (a.verdict.map(|v| v.pass), None)
        }
        Err(Error::Estimation(msg)) => {
            write_rates_csv(&dir.join("rates.csv"), &[])?;
            (None, Some(msg))
        }
        Err(e) => return Err(e),
    };

    let summary = RunSummary {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        mode: cfg.mode,
        engine,
        n_agents: net.n_agents(),
        horizon: cfg.horizon,
        trials,
        invariant_status: if violations.is_clean() {
            "clean".into()
        } else {
            "violations".into()
        },
        violations: violations.total,
        bounds: bounds_record(&model, net.n_agents()),
        verdict_pass,
        rate_error,
        out: dir.clone(),
    };
    let mut w = create(&dir.join("summary.jsonl"))?;
    let line = serde_json::to_string(&summary).map_err(|e| Error::Config(e.to_string()))?;
    writeln!(w, "{line}").map_err(|e| Error::io("writing summary", e))?;
    w.flush().map_err(|e| Error::io("writing summary", e))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dir: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset("complete-0.9").unwrap();
        cfg.horizon = 8;
        cfg.trials = 20_000;
        cfg.rates.resamples = 50;
        cfg.out = dir.to_path_buf();
        cfg
    }

    #[test]
    fn bundle_is_complete_and_hash_recomputes() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = small(tmp.path());
        let summary = run_experiment(&cfg, &RunOptions::default()).unwrap();
        for f in [
            "config.toml",
            "summary.jsonl",
            "mistakes.csv",
            "patterns.csv",
            "rates.csv",
            "verdict.json",
            "verdict.txt",
            "neg_log_p.csv",
            "social_paths.csv",
        ] {
            assert!(tmp.path().join(f).exists(), "{f}");
        }
        let echoed = ExperimentConfig::load(&tmp.path().join("config.toml")).unwrap();
        assert_eq!(echoed.hash(), summary.config_hash);
        assert_eq!(summary.invariant_status, "clean");
        assert_eq!(summary.bounds.crossover_n, Some(9));
    }

    #[test]
    fn exact_mode_bundle() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = small(tmp.path());
        cfg.mode = RunMode::ExactForward;
        cfg.network.n = 2;
        cfg.horizon = 10;
        let summary = run_experiment(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(summary.engine, EngineKind::Factorized);
        let curve = MistakeCurve::read_csv_file(&tmp.path().join("mistakes.csv")).unwrap();
        assert!((curve.p_hat(Conditioning::All, 0, 0) - 0.1).abs() < 1e-12);
        assert!(!tmp.path().join("patterns.csv").exists());
    }
}
