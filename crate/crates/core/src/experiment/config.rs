//! Experiment configuration (TOML).
//!
//! ```toml
//! horizon = 20            # periods
//! trials = 100000         # Monte Carlo trials
//! seed = 7
//! engine = "auto"         # auto | generic | factorized | star
//! mode = "monte_carlo"    # monte_carlo | exact_forward
//! delta = 0.0             # discount, micro games only
//! out = "runs/complete-3"
//!
//! [signal]
//! kind = "symmetric_binary"
//! p = 0.9                 # P[signal = state]
//!
//! [network]
//! kind = "complete"       # complete | star | ring | autarky | custom
//! n = 3
//! # edges = [[1, 2], [2, 3]]   # custom only: observer, observed (1-based)
//!
//! [window]
//! kind = "auto"           # or "fixed" with t_min, t_max (periods, 1-based)
//! floor = 50              # minimum mistakes per cell
//! skip_fraction = 0.0     # leading share of the qualifying run to drop
//! per_agent = false
//! ```
//!
//! A `table` signal lists `alphabet`, `g` and `b` probabilities, plus optional
//! `[[signal.overrides]]` entries with `agent` and `t` (1-based).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::inference::{EngineChoice, DEFAULT_ENUMERATION_BUDGET};
use crate::network::{Network, Topology};
use crate::rates::{RateMethod, WindowPolicy, DEFAULT_RESAMPLES};
use crate::signal::{SignalDist, SignalModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    SymmetricBinary {
        p: f64,
    },
    Table {
        alphabet: Vec<String>,
        g: Vec<f64>,
        b: Vec<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        overrides: Vec<SignalOverride>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalOverride {
    /// 1-based
    pub agent: usize,
    /// 1-based
    pub t: usize,
    pub alphabet: Vec<String>,
    pub g: Vec<f64>,
    pub b: Vec<f64>,
}

impl SignalSpec {
    pub fn build(&self) -> Result<SignalModel> {
        match self {
            SignalSpec::SymmetricBinary { p } => SignalModel::symmetric_binary(*p),
            SignalSpec::Table { alphabet, g, b, overrides } => {
                let mut model = SignalModel::stationary(SignalDist::new(alphabet.clone(), g.clone(), b.clone())?);
                for o in overrides {
                    if o.agent == 0 || o.t == 0 {
                        return Err(Error::Config("signal overrides use 1-based agent and t".into()));
                    }
                    model = model.with_override(o.agent - 1, o.t - 1, SignalDist::new(o.alphabet.clone(), o.g.clone(), o.b.clone())?);
                }
                Ok(model)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub kind: Topology,
    pub n: usize,
    /// `[observer, observed]`, 1-based
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
}

impl NetworkSpec {
    pub fn build(&self) -> Result<Network> {
        let edges = match &self.edges {
            Some(list) => {
                let mut out = Vec::with_capacity(list.len());
                for &[i, j] in list {
                    if i == 0 || j == 0 {
                        return Err(Error::Config("network edges are 1-based".into()));
                    }
                    out.push((i - 1, j - 1));
                }
                Some(out)
            }
            None => None,
        };
        Network::make(self.kind, self.n, edges.as_deref())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    #[default]
    MonteCarlo,
    ExactForward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    #[serde(default)]
    pub method: RateMethod,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
}

fn default_resamples() -> usize {
    DEFAULT_RESAMPLES
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            method: RateMethod::OlsLog,
            resamples: DEFAULT_RESAMPLES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// periods
    pub horizon: usize,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub engine: EngineChoice,
    #[serde(default)]
    pub mode: RunMode,
    /// discount factor, micro games only
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// leading trials whose `S/t` paths are written
    #[serde(default = "default_sample_paths")]
    pub sample_paths: u64,
    /// record invariant violations and continue (debugging only)
    #[serde(default)]
    pub collect_violations: bool,
    /// weighted enumeration steps (generic engine) or history nodes (forward expansion)
    #[serde(default = "default_budget")]
    pub budget: u64,
    pub signal: SignalSpec,
    pub network: NetworkSpec,
    #[serde(default)]
    pub window: WindowPolicy,
    #[serde(default)]
    pub rates: RateConfig,
}

fn default_trials() -> u64 {
    100_000
}

fn default_out() -> PathBuf {
    PathBuf::from("netlearn-out")
}

fn default_sample_paths() -> u64 {
    8
}

fn default_budget() -> u64 {
    DEFAULT_ENUMERATION_BUDGET
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::Config(format!("delta must lie in [0, 1), got {}", self.delta)));
        }
        self.signal.build()?;
        self.network.build()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded. The output directory
    /// is excluded since it does not affect results.
    pub fn hash(&self) -> String {
        let mut keyed = self.clone();
        keyed.out = PathBuf::new();
        let canonical = serde_json::to_string(&keyed).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Named configurations.
    pub fn preset(name: &str) -> Result<Self> {
        let (signal, network, horizon, trials, window, out) = match name {
            "complete-0.9" => (
                SignalSpec::SymmetricBinary { p: 0.9 },
                NetworkSpec {
                    kind: Topology::Complete,
                    n: 3,
                    edges: None,
                },
                20,
                1_000_000,
                WindowPolicy::default(),
                "runs/complete-0.9",
            ),
            "star-11" => (
                SignalSpec::SymmetricBinary { p: 0.9 },
                NetworkSpec {
                    kind: Topology::Star,
                    n: 11,
                    edges: None,
                },
                20,
                1_000_000,
                WindowPolicy::Auto {
                    floor: crate::rates::DEFAULT_FLOOR,
                    skip_fraction: 0.5,
                    per_agent: true,
                },
                "runs/star-11",
            ),
            other => {
                return Err(Error::Config(format!(
                    "unknown preset `{other}` (available: {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(ExperimentConfig {
            horizon,
            trials,
            seed: 1,
            engine: EngineChoice::Auto,
            mode: RunMode::MonteCarlo,
            delta: 0.0,
            out: PathBuf::from(out),
            sample_paths: default_sample_paths(),
            collect_violations: false,
            budget: default_budget(),
            signal,
            network,
            window,
            rates: RateConfig::default(),
        })
    }
}

pub const PRESETS: [&str; 2] = ["complete-0.9", "star-11"];

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
horizon = 6
trials = 500
seed = 9
engine = "generic"
mode = "exact_forward"

[signal]
kind = "table"
alphabet = ["lo", "hi"]
g = [0.3, 0.7]
b = [0.6, 0.4]

[[signal.overrides]]
agent = 2
t = 3
alphabet = ["x", "y", "z"]
g = [0.2, 0.3, 0.5]
b = [0.5, 0.3, 0.2]

[network]
kind = "custom"
n = 3
edges = [[1, 2], [2, 3], [3, 1]]

[window]
kind = "fixed"
t_min = 2
t_max = 5
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.engine, EngineChoice::Generic);
        assert_eq!(cfg.window, WindowPolicy::Fixed { t_min: 2, t_max: 5 });
        let model = cfg.signal.build().unwrap();
        assert_eq!(model.alphabet_size(1, 2), 3);
        assert!(cfg.network.build().unwrap().observes(0, 1));
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.hash(), cfg.hash());
    }

    #[test]
    fn presets_round_trip() {
        for name in PRESETS {
            let cfg = ExperimentConfig::preset(name).unwrap();
            assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
        }
        assert!(ExperimentConfig::preset("nope").is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml(
            "horizon = 3\n[signal]\nkind = \"symmetric_binary\"\np = 1.2\n[network]\nkind = \"complete\"\nn = 2\n"
        )
        .is_err());
        assert!(ExperimentConfig::from_toml(
            "horizon = 0\n[signal]\nkind = \"symmetric_binary\"\np = 0.9\n[network]\nkind = \"complete\"\nn = 2\n"
        )
        .is_err());
        assert!(ExperimentConfig::from_toml(
            "horizon = 3\ntypo = 1\n[signal]\nkind = \"symmetric_binary\"\np = 0.9\n[network]\nkind = \"complete\"\nn = 2\n"
        )
        .is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::preset("complete-0.9").unwrap();
        let mut b = a.clone();
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let mut c = a.clone();
        c.out = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), c.hash());
    }
}
