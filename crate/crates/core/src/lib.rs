//! Exact Bayesian social learning on directed observation networks.
//!
//! Agents receive private signals about a binary state, observe the past
//! actions of their neighbors, and act myopically on their posterior. The
//! crate computes exact beliefs, simulates and enumerates mistake
//! probabilities, estimates learning rates and checks them against the
//! autarky rate and the universal bound `M`.

#![allow(clippy::needless_range_loop, clippy::type_complexity)]

pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod inference;
pub mod logspace;
pub mod micro;
pub mod network;
mod par;
pub mod rates;
pub mod rng;
pub mod signal;
pub mod theory;

pub use error::{Error, Result};
