//! Repeated non-atomic routing over parallel links with partial signaling.
//!
//! A planner sends state-dependent route recommendations to a fraction `ν`
//! of the population. Participants decide how much to disobey from their
//! aggregate regret; everyone else best-responds to a smoothed forecast of
//! participant behavior. The crate simulates these dynamics, checks
//! signals for obedience, and exposes the diagnostics used to study
//! convergence.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod estimators;
pub mod export;
pub mod model;
pub mod presets;
pub mod simplex;

pub use error::{Error, Result};
