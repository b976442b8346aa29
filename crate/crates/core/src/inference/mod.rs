//! Exact Bayesian beliefs and myopic actions.
//!
//! Three engines share one observable contract ([`BeliefEngine`]):
//!
//! * [`GenericEngine`] enumerates every signal-matrix prefix and works on any
//!   network, within an enumeration budget.
//! * [`FilterEngine`] in complete mode exploits public actions: each agent's
//!   consistent signal prefixes are tracked by a count filter per state, so the
//!   cost is polynomial in the horizon.
//! * [`FilterEngine`] in star mode does the same for a star.
//!
//! For every agent and period an engine reports the posterior `p`, the
//! posterior log-odds `L`, the social likelihood `S` (the log-odds of an
//! outside observer who sees only `H^i_t`) and the private likelihood
//! `P = log P[s | H, g] - log P[s | H, b]`.

mod filter;
mod generic;

pub use filter::{FilterEngine, FilterMode, NodeCache, DEFAULT_NODE_BUDGET, MAX_FILTER_HORIZON};
pub use generic::{GenericEngine, DEFAULT_ENUMERATION_BUDGET};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logspace::sigmoid;
use crate::network::Network;
use crate::signal::{Action, Label, SignalMatrix, SignalModel};

/// |L| below this is treated as an exact tie.
pub const TIE_EPS: f64 = 1e-12;

/// Action taken when the posterior is exactly one half.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    G,
    B,
}

pub const DEFAULT_TIE_RULE: TieRule = TieRule::G;

impl TieRule {
    pub fn action(self) -> Action {
        match self {
            TieRule::G => Label::G,
            TieRule::B => Label::B,
        }
    }
}

/// Myopic action from posterior log-odds.
#[inline]
pub fn myopic_from_llr(llr: f64, tie: TieRule) -> Action {
    if llr.abs() < TIE_EPS {
        tie.action()
    } else if llr > 0.0 {
        Label::G
    } else {
        Label::B
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    /// Posterior probability of g.
    pub p: f64,
    /// Posterior log-odds.
    pub llr: f64,
    /// Social likelihood.
    pub social: f64,
    /// Private likelihood.
    pub private: f64,
}

impl BeliefState {
    pub fn new(llr: f64, social: f64, private: f64) -> Self {
        BeliefState {
            p: sigmoid(llr),
            llr,
            social,
            private,
        }
    }

    pub fn is_tied(&self) -> bool {
        self.llr.abs() < TIE_EPS
    }
}

/// Myopic action under the default tie rule (ties go to g).
pub fn myopic_action(belief: &BeliefState) -> Action {
    myopic_from_llr(belief.llr, DEFAULT_TIE_RULE)
}

/// Actions and beliefs of every agent over the horizon for one signal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub signals: SignalMatrix,
    actions: Vec<Action>,
    beliefs: Vec<BeliefState>,
}

impl Trajectory {
    pub(crate) fn with_capacity(signals: SignalMatrix) -> Self {
        let len = signals.n_agents() * signals.horizon();
        Trajectory {
            actions: vec![Label::G; len],
            beliefs: vec![BeliefState::new(0.0, 0.0, 0.0); len],
            signals,
        }
    }

    #[inline]
    fn slot(&self, agent: usize, period: usize) -> usize {
        agent * self.signals.horizon() + period
    }

    pub(crate) fn record(&mut self, agent: usize, period: usize, action: Action, belief: BeliefState) {
        let k = self.slot(agent, period);
        self.actions[k] = action;
        self.beliefs[k] = belief;
    }

    pub fn n_agents(&self) -> usize {
        self.signals.n_agents()
    }

    pub fn horizon(&self) -> usize {
        self.signals.horizon()
    }

    pub fn action(&self, agent: usize, period: usize) -> Action {
        self.actions[self.slot(agent, period)]
    }

    pub fn belief(&self, agent: usize, period: usize) -> &BeliefState {
        &self.beliefs[self.slot(agent, period)]
    }

    pub fn is_tied(&self, agent: usize, period: usize) -> bool {
        self.belief(agent, period).is_tied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Generic,
    Factorized,
    Star,
}

impl EngineKind {
    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Generic => "generic",
            EngineKind::Factorized => "factorized",
            EngineKind::Star => "star",
        }
    }
}

/// Engine choice in configs; `Auto` resolves to the cheapest applicable engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EngineChoice {
    #[default]
    Auto,
    Generic,
    Factorized,
    Star,
}

pub trait BeliefEngine: Send + Sync {
    fn kind(&self) -> EngineKind;
    fn n_agents(&self) -> usize;
    fn horizon(&self) -> usize;
    fn tie_rule(&self) -> TieRule;

    /// Play the myopic dynamics on one realized signal matrix.
    fn play(&self, signals: &SignalMatrix) -> Result<Trajectory>;

    /// Per-worker state that may speed up repeated `play_scratch` calls.
    fn scratch(&self) -> EngineScratch {
        EngineScratch::default()
    }

    /// Same result as `play`, possibly faster given reused scratch.
    fn play_scratch(&self, signals: &SignalMatrix, scratch: &mut EngineScratch) -> Result<Trajectory> {
        let _ = scratch;
        self.play(signals)
    }
}

/// Reusable per-worker engine state.
#[derive(Default)]
pub struct EngineScratch {
    pub(crate) nodes: Option<NodeCache>,
}

/// Resolve `choice` against a model and network.
pub fn resolve_engine(choice: EngineChoice, model: &SignalModel, net: &Network) -> Result<EngineKind> {
    match choice {
        EngineChoice::Generic => Ok(EngineKind::Generic),
        EngineChoice::Factorized => {
            FilterEngine::check(FilterMode::Complete, model, net)?;
            Ok(EngineKind::Factorized)
        }
        EngineChoice::Star => {
            FilterEngine::check(FilterMode::Star, model, net)?;
            Ok(EngineKind::Star)
        }
        EngineChoice::Auto => {
            if FilterEngine::check(FilterMode::Complete, model, net).is_ok() {
                Ok(EngineKind::Factorized)
            } else if FilterEngine::check(FilterMode::Star, model, net).is_ok() {
                Ok(EngineKind::Star)
            } else {
                Ok(EngineKind::Generic)
            }
        }
    }
}

/// Construct an engine of the given kind.
pub fn build_engine(
    kind: EngineKind,
    model: &SignalModel,
    net: &Network,
    horizon: usize,
    tie: TieRule,
    budget: u64,
) -> Result<Box<dyn BeliefEngine>> {
    Ok(match kind {
        EngineKind::Generic => Box::new(GenericEngine::build(model, net, horizon, tie, budget)?),
        EngineKind::Factorized => Box::new(FilterEngine::new(FilterMode::Complete, model, net, horizon, tie)?),
        EngineKind::Star => Box::new(FilterEngine::new(FilterMode::Star, model, net, horizon, tie)?),
    })
}

/// Beliefs via full enumeration.
pub fn beliefs_generic(model: &SignalModel, net: &Network, horizon: usize, signals: &SignalMatrix) -> Result<Trajectory> {
    GenericEngine::build(model, net, horizon, DEFAULT_TIE_RULE, DEFAULT_ENUMERATION_BUDGET)?.play(signals)
}

/// Beliefs on a complete network via per-agent count filters.
pub fn beliefs_complete_factorized(model: &SignalModel, net: &Network, horizon: usize, signals: &SignalMatrix) -> Result<Trajectory> {
    FilterEngine::new(FilterMode::Complete, model, net, horizon, DEFAULT_TIE_RULE)?.play(signals)
}

/// Beliefs on a star network via per-agent count filters.
pub fn beliefs_star(model: &SignalModel, net: &Network, horizon: usize, signals: &SignalMatrix) -> Result<Trajectory> {
    FilterEngine::new(FilterMode::Star, model, net, horizon, DEFAULT_TIE_RULE)?.play(signals)
}

pub(crate) fn check_signal_shape(signals: &SignalMatrix, n: usize, horizon: usize) -> Result<()> {
    if signals.n_agents() != n || signals.horizon() != horizon {
        return Err(Error::Config(format!(
            "signal matrix is {}x{}, engine expects {n}x{horizon}",
            signals.n_agents(),
            signals.horizon()
        )));
    }
    Ok(())
}
