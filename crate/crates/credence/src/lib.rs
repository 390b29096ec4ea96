//! Credence: a generative causal-validation toolkit.
//!
//! Learns a data-generating process anchored at an observed sample, with
//! user-specified treatment-effect and confounding-bias functions, then uses
//! samples from it (with known potential outcomes) to benchmark and rank
//! average-treatment-effect estimators.

pub mod constraints;
pub mod credence;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod nnet;
pub mod seed;
pub mod tabular;

pub use error::{Error, Result};
