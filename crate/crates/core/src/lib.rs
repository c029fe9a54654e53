//! Lifted primal-dual solvers for bilinearly coupled convex-concave
//! minimax problems, with reference methods and convergence measurement.

// `!(a > b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod instances;
pub mod linalg;
pub mod lpd;
pub mod metrics;
pub mod problem;
pub mod reference;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
