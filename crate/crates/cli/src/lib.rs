//! Config-driven experiment runner around `lpd-core`: builds an instance
//! from JSON, runs the requested solvers and writes CSV traces, sweep
//! summaries and a manifest of every constant used.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiment;
pub mod instance;
pub mod plot;
pub mod sweep;
pub mod validate;

pub use config::ExperimentConfig;
pub use experiment::{run_experiment, ExperimentReport, RunStatus};
pub use sweep::sweep_kappa;
pub use validate::{validate_config, ValidationReport};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const FAILURE: u8 = 1;
    pub const INVALID: u8 = 2;
    pub const ALL_DIVERGED: u8 = 3;
}
