//! `netlearn verify`: oracle and invariant checks plus the presets.

use std::path::Path;

use netlearn_core::dynamics::{check_imitation, run_exact_forward, run_monte_carlo, Conditioning, McOptions, ViolationReport};
use netlearn_core::experiment::{run_experiment, ExperimentConfig, RunOptions, PRESETS};
use netlearn_core::inference::{BeliefEngine, EngineChoice, FilterEngine, FilterMode, GenericEngine, TieRule, DEFAULT_ENUMERATION_BUDGET};
use netlearn_core::micro::{check_myopic, DeviationMode, MicroGame, GAIN_TOL};
use netlearn_core::network::{Network, Topology};
use netlearn_core::rates::{estimate_rate, RateMethod, RateOptions, WindowPolicy};
use netlearn_core::signal::{SignalMatrix, SignalModel};
use netlearn_core::theory::{single_agent_exact_mistakes, RateBounds};
use netlearn_core::{Error, Result};

const DEFAULT_PRESET_TRIALS: u64 = 100_000;

type Check = (String, bool, String);

fn constants() -> Result<Check> {
    let b = RateBounds::for_model(&SignalModel::symmetric_binary(0.9)?)?;
    let c = b.crossover_n()?;
    let pass = (b.m - 4.39445).abs() < 1e-4 && (b.r_a - 0.51083).abs() < 1e-4 && c == 9;
    Ok((
        "constants at p=0.9".into(),
        pass,
        format!("M={:.5} r_a={:.5} crossover_n={c}", b.m, b.r_a),
    ))
}

fn single_agent_rate() -> Result<Check> {
    let model = SignalModel::symmetric_binary(0.9)?;
    let curve = single_agent_exact_mistakes(&model, 200)?;
    let opts = RateOptions {
        method: RateMethod::OlsLog,
        window: WindowPolicy::Fixed { t_min: 50, t_max: 200 },
        ..Default::default()
    };
    let r = estimate_rate(&curve, 0, &opts)?.rate;
    let r_a = RateBounds::for_model(&model)?.r_a;
    let rel = r / r_a - 1.0;
    Ok((
        "single-agent slope on [50, 200]".into(),
        rel.abs() < 0.02,
        format!("rate={r:.5} r_a={r_a:.5} rel={rel:+.4}"),
    ))
}

fn engine_equivalence() -> Result<Check> {
    let mut cases = 0usize;
    let mut worst: f64 = 0.0;
    let mut actions_ok = true;
    for p in [0.75, 0.9] {
        let model = SignalModel::symmetric_binary(p)?;
        for n in [2, 3] {
            for (top, mode) in [(Topology::Complete, FilterMode::Complete), (Topology::Star, FilterMode::Star)] {
                let net = Network::make(top, n, None)?;
                for horizon in 1..=4 {
                    let g = GenericEngine::build(&model, &net, horizon, TieRule::G, DEFAULT_ENUMERATION_BUDGET)?;
                    let f = FilterEngine::new(mode, &model, &net, horizon, TieRule::G)?;
                    for m in SignalMatrix::enumerate(|_, _| 2, n, horizon) {
                        let (a, b) = (g.play(&m)?, f.play(&m)?);
                        for i in 0..n {
                            for t in 0..horizon {
                                actions_ok &= a.action(i, t) == b.action(i, t);
                                let (x, y) = (a.belief(i, t), b.belief(i, t));
                                worst = worst
                                    .max((x.llr - y.llr).abs())
                                    .max((x.social - y.social).abs())
                                    .max((x.private - y.private).abs());
                            }
                        }
                        cases += 1;
                    }
                }
            }
        }
    }
    Ok((
        "filter engines match enumeration".into(),
        actions_ok && worst < 1e-9,
        format!("{cases} signal matrices, max belief gap {worst:.2e}"),
    ))
}

fn exact_autarky() -> Result<Check> {
    let model = SignalModel::symmetric_binary(0.9)?;
    let net = Network::make(Topology::Autarky, 1, None)?;
    let a = run_exact_forward(&model, &net, 10, EngineChoice::Auto, 1 << 20)?;
    let b = single_agent_exact_mistakes(&model, 10)?;
    let gap = (0..10)
        .map(|t| (a.p_hat(Conditioning::All, 0, t) - b.p_hat(Conditioning::All, 0, t)).abs())
        .fold(0.0, f64::max);
    Ok((
        "forward expansion matches binomial tails".into(),
        gap < 1e-12,
        format!("max gap {gap:.2e}"),
    ))
}

fn invariants(threads: Option<usize>) -> Result<Check> {
    let model = SignalModel::symmetric_binary(0.9)?;
    let mut total = 0u64;
    let mut bad = 0u64;
    for (top, n, horizon) in [(Topology::Complete, 4, 30), (Topology::Star, 11, 15), (Topology::Ring, 3, 5)] {
        let net = Network::make(top, n, None)?;
        let opts = McOptions {
            trials: 10_000,
            seed: 17,
            threads,
            collect_violations: true,
            ..Default::default()
        };
        let out = run_monte_carlo(&model, &net, horizon, EngineChoice::Auto, &opts)?;
        total += opts.trials;
        bad += out.violations.total;
    }
    Ok((
        "|P| <= M t and L = S + P".into(),
        bad == 0,
        format!("{total} trajectories, {bad} violations"),
    ))
}

fn imitation() -> Result<Check> {
    let model = SignalModel::symmetric_binary(0.9)?;
    let mut checked = 0;
    let mut bad = 0;
    for (top, n, horizon) in [(Topology::Complete, 2, 12), (Topology::Star, 3, 6)] {
        let net = Network::make(top, n, None)?;
        let curve = run_exact_forward(&model, &net, horizon, EngineChoice::Auto, 1 << 22)?;
        let rep = check_imitation(&curve, &net, 0.0);
        checked += rep.checked;
        bad += rep.violations.len();
    }
    Ok((
        "imitation bound on exact curves".into(),
        bad == 0,
        format!("{checked} comparisons, {bad} violations"),
    ))
}

fn micro(threads: Option<usize>) -> Result<Check> {
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut threshold_bad = 0;
    for n in [2, 3] {
        let net = Network::make(Topology::Complete, n, None)?;
        let game = MicroGame::new(SignalModel::symmetric_binary(0.9)?, net, 2, 0.0)?;
        let rep = check_myopic(&game, DeviationMode::Exhaustive, threads)?;
        worst = rep.deviations.iter().map(|d| d.gain).fold(worst, f64::max);
        threshold_bad += rep.lemma1.violations;
    }
    Ok((
        "myopic play is an equilibrium at delta = 0".into(),
        worst <= GAIN_TOL && threshold_bad == 0,
        format!("max gain {worst:.2e}, {threshold_bad} threshold violations"),
    ))
}

fn preset(name: &str, trials: u64, out: &Path, threads: Option<usize>) -> Result<Check> {
    let mut cfg = ExperimentConfig::preset(name)?;
    cfg.trials = trials;
    cfg.out = out.join(name);
    let s = run_experiment(&cfg, &RunOptions { threads })?;
    let pass = s.invariant_status == "clean" && s.verdict_pass.unwrap_or(false);
    Ok((
        format!("preset {name}"),
        pass,
        format!("{trials} trials, verdict {:?}, bundle {}", s.verdict_pass, cfg.out.display()),
    ))
}

pub fn run(trials: Option<u64>, out: &Path, threads: Option<usize>) -> Result<()> {
    let trials = trials.unwrap_or(DEFAULT_PRESET_TRIALS);
    let mut checks: Vec<Result<Check>> = vec![
        constants(),
        single_agent_rate(),
        engine_equivalence(),
        exact_autarky(),
        invariants(threads),
        imitation(),
        micro(threads),
    ];
    for name in PRESETS {
        checks.push(preset(name, trials, out, threads));
    }
    let mut failed = 0usize;
    for c in checks {
        match c {
            Ok((name, pass, detail)) => {
                println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
                failed += usize::from(!pass);
            }
            Err(e) => {
                println!("[FAIL] {e}");
                failed += 1;
            }
        }
    }
    if failed > 0 {
        println!("{failed} check(s) failed");
        return Err(Error::Invariant(Box::new(ViolationReport {
            total: failed as u64,
            ..Default::default()
        })));
    }
    println!("all checks passed");
    Ok(())
}
