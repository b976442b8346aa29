use thiserror::Error;

use crate::dynamics::ViolationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid signal model: {0}")]
    InvalidSignal(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("unknown signal symbol `{symbol}` for agent {agent}, period {period}")]
    UnknownSymbol { agent: usize, period: usize, symbol: String },

    #[error("engine `{engine}` does not apply: {reason}")]
    EngineMismatch { engine: &'static str, reason: String },

    #[error("resource budget exceeded: {0}")]
    Budget(String),

    #[error("internal error: information set for agent {agent} at period {period} is unreachable")]
    Unreachable { agent: usize, period: usize },

    #[error("{0}")]
    Invariant(Box<ViolationReport>),

    #[error("rate estimation failed: {0}")]
    Estimation(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed table: {0}")]
    Table(String),
}

impl Error {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Budget(_) => 3,
            Error::Invariant(_) | Error::Unreachable { .. } => 4,
            Error::Io { .. } => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
