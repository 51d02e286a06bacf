//! Preferential attachment trees with time-varying node fitness.
//!
//! The crate simulates growth under the dynamical-fitness rule and its
//! benchmarks, measures the resulting degree structure, and evaluates the
//! static-fitness condensation criterion.

// `!(x > 0.0)` guards are written to reject NaN along with the bad range
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod condensation;
pub mod diagnostics;
pub mod error;
pub mod fitness;
pub mod graph;
pub mod harness;
pub mod increments;
pub mod quad;

pub use error::{Error, Result};
