//! Scalable meta-learning Gaussian processes for Bayesian optimization.
//!
//! A multi-task GP whose test-task prior is a weighted sum of independently
//! fitted meta-task posteriors, a brute-force joint multi-task oracle that
//! checks the modular computation, a UCB optimization loop, and synthetic
//! benchmark families.

// `!(a < b)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarks;
pub mod bo;
pub mod error;
pub mod gp;
pub mod harness;
pub mod scaml;
pub mod util;

pub use error::{Error, Result};
