//! Slot-level simulation and analysis of fast-retrial random access for
//! delay-sensitive (type-1) machine-type devices sharing a sub-pool of `l1`
//! preambles out of `L`.
//!
//! - [`model`]: one slot of arrivals, preamble draws and collisions.
//! - [`stability`]: closed-form stability condition and pool-size bounds.
//! - [`controller`]: stochastic-gradient pool sizing from observed activity.
//! - [`engine`]: horizon runs, metrics, instability detection, sweeps.
//! - [`oracle`]: exact truncated Markov chain for up to three devices.
//! - [`config`], [`experiments`]: scenario files and figure presets for the CLI.

pub mod config;
pub mod controller;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod model;
pub mod oracle;
pub mod stability;

pub use error::{Error, Result};
