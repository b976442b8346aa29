use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use netlearn_core::dynamics::{MistakeCurve, MistakePatterns};
use netlearn_core::experiment::{self, bounds_record, ExperimentConfig, RunOptions, PRESETS};
use netlearn_core::micro::{check_myopic, DeviationMode, MicroGame, GAIN_TOL};
use netlearn_core::network::{Network, Topology};
use netlearn_core::signal::SignalModel;
use netlearn_core::{Error, Result};

mod verify;

#[derive(Parser)]
#[command(name = "netlearn", version, about = "Bayesian social learning on observation networks")]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true, env = "NETLEARN_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Source {
    /// Experiment config (TOML)
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Named config
    #[arg(long)]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> Result<Option<ExperimentConfig>> {
        match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path).map(Some),
            (None, Some(name)) => ExperimentConfig::preset(name).map(Some),
            (None, None) => Ok(None),
        }
    }

    fn require(&self) -> Result<ExperimentConfig> {
        self.load()?
            .ok_or_else(|| Error::Config(format!("pass --config or --preset ({})", PRESETS.join(", "))))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print M, the autarky rate and the crossover network size
    Bounds {
        #[command(flatten)]
        source: Source,
        /// Symmetric binary signal accuracy (instead of a config)
        #[arg(long)]
        p: Option<f64>,
    },
    /// Run an experiment and write its result bundle
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate rates from a run directory's mistake curve
    Rates {
        /// Run directory with mistakes.csv and config.toml
        run: PathBuf,
        /// Override the echoed config (window, rates, network)
        #[command(flatten)]
        source: Source,
        /// Where to write rates.csv and the verdict (default: the run directory)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the myopic profile of a small strategic game
    Micro {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long = "horizon", short = 't', default_value_t = 2)]
        horizon: usize,
        #[arg(long, default_value_t = 0.9)]
        p: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, value_enum, default_value_t = TopologyArg::Complete)]
        topology: TopologyArg,
        #[arg(long, value_enum, default_value_t = ModeArg::Exhaustive)]
        mode: ModeArg,
        /// Also write micro.json here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant and oracle suite plus the presets
    Verify {
        /// Trials for each preset run
        #[arg(long)]
        trials: Option<u64>,
        /// Directory for preset bundles
        #[arg(long, default_value = "runs/verify")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    Complete,
    Star,
    Ring,
    Autarky,
}

impl From<TopologyArg> for Topology {
    fn from(t: TopologyArg) -> Self {
        match t {
            TopologyArg::Complete => Topology::Complete,
            TopologyArg::Star => Topology::Star,
            TopologyArg::Ring => Topology::Ring,
            TopologyArg::Autarky => Topology::Autarky,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exhaustive,
    OneShot,
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string(value).expect("serializable"));
}

fn bounds(source: &Source, p: Option<f64>) -> Result<()> {
    let (model, n) = match (p, source.load()?) {
        (Some(p), _) => (SignalModel::symmetric_binary(p)?, 1),
        (None, Some(cfg)) => (cfg.signal.build()?, cfg.network.n),
        (None, None) => (SignalModel::symmetric_binary(0.9)?, 1),
    };
    let rec = bounds_record(&model, n);
    let show = |x: Option<f64>| x.map(|v| format!("{v:.5}")).unwrap_or_else(|| "n/a".into());
    println!("M            {:.5}  nats/period", rec.m);
    println!("r_a          {}  nats/period", show(rec.r_a));
    println!("n*r_a        {}  nats/period (n = {n})", show(rec.public_benchmark));
    println!(
        "crossover_n  {}",
        rec.crossover_n
            .map(|c| c.to_string())
            .unwrap_or_else(|| "none (uninformative signals)".into())
    );
    print_json(&rec);
    Ok(())
}

fn run(source: &Source, seed: Option<u64>, trials: Option<u64>, out: Option<PathBuf>, threads: Option<usize>) -> Result<()> {
    let mut cfg = source.require()?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(o) = out {
        cfg.out = o;
    }
    let summary = experiment::run_experiment(&cfg, &RunOptions { threads })?;
    if let Ok(text) = std::fs::read_to_string(cfg.out.join("verdict.txt")) {
        print!("{text}");
    }
    if let Some(msg) = &summary.rate_error {
        println!("rates not estimated: {msg}");
    }
    print_json(&summary);
    Ok(())
}

fn rates(dir: &Path, source: &Source, out: Option<PathBuf>, threads: Option<usize>) -> Result<()> {
    let cfg = match source.load()? {
        Some(c) => c,
        None => ExperimentConfig::load(&dir.join("config.toml"))?,
    };
    let mut curve = MistakeCurve::read_csv_file(&dir.join("mistakes.csv"))?;
    let patterns = dir.join("patterns.csv");
    if patterns.exists() {
        let f = std::fs::File::open(&patterns).map_err(|e| Error::Table(format!("{}: {e}", patterns.display())))?;
        curve.patterns = Some(MistakePatterns::read_csv(f, curve.n_agents())?);
    }
    let experiment::Analysis {
        estimates,
        unestimated,
        verdict,
    } = experiment::analyze(&curve, &cfg, threads)?;
    let out = out.unwrap_or_else(|| dir.to_path_buf());
    std::fs::create_dir_all(&out).map_err(|e| Error::Table(format!("{}: {e}", out.display())))?;
    experiment::write_rates_csv(&out.join("rates.csv"), &estimates)?;
    for e in &estimates {
        println!(
            "agent {:>2}  window [{}, {}]  rate {:.5}  se {:.5}  ({})",
            e.agent,
            e.t_min,
            e.t_max,
            e.rate,
            e.se,
            e.method.name()
        );
    }
    for (agent, reason) in &unestimated {
        println!("agent {agent:>2}  not estimated: {reason}");
    }
    if let Some(v) = verdict {
        experiment::write_verdict(&out, &v)?;
        print!("{}", v.render());
        print_json(&v);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn micro(
    n: usize,
    horizon: usize,
    p: f64,
    delta: f64,
    topology: TopologyArg,
    mode: ModeArg,
    out: Option<PathBuf>,
    threads: Option<usize>,
) -> Result<()> {
    let net = Network::make(topology.into(), n, None)?;
    let game = MicroGame::new(SignalModel::symmetric_binary(p)?, net, horizon, delta)?;
    let mode = match mode {
        ModeArg::Exhaustive => DeviationMode::Exhaustive,
        ModeArg::OneShot => DeviationMode::OneShot,
    };
    let report = check_myopic(&game, mode, threads)?;
    print!("{}", report.render());
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir).map_err(|e| Error::Table(format!("{}: {e}", dir.display())))?;
        let text = serde_json::to_string_pretty(&report).expect("serializable");
        std::fs::write(dir.join("micro.json"), text + "\n").map_err(|e| Error::Table(e.to_string()))?;
    }
    print_json(&serde_json::json!({
        "equilibrium_candidate": report.equilibrium_candidate,
        "max_gain": report.deviations.iter().map(|d| d.gain).fold(f64::NEG_INFINITY, f64::max),
        "gain_tolerance": GAIN_TOL,
        "threshold_violations": report.lemma1.violations,
        "imitation_violations": report.imitation.violations.len(),
    }));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let threads = cli.threads;
    let result = match cli.command {
        Command::Bounds { source, p } => bounds(&source, p),
        Command::Run { source, seed, trials, out } => run(&source, seed, trials, out, threads),
        Command::Rates { run, source, out } => rates(&run, &source, out, threads),
        Command::Micro {
            n,
            horizon,
            p,
            delta,
            topology,
            mode,
            out,
        } => micro(n, horizon, p, delta, topology, mode, out, threads),
        Command::Verify { trials, out } => verify::run(trials, &out, threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
