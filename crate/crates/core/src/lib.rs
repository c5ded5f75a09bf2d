//! Posterior sampling for linear inverse problems with score-based priors.

pub mod cli;
pub mod domain;
pub mod error;
pub mod estimators;
pub mod forward;
pub mod oracles;
pub mod prior;
pub mod sampler;
pub mod score_training;

pub use error::{Error, Result};
