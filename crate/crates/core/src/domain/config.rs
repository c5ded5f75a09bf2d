use serde::{Deserialize, Serialize};

use super::NoiseSchedule;
use crate::error::{Error, Result};

/// How the likelihood variance σ_η² is set for a Langevin step that targets
/// scale i (using τ_{i+1}).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LikelihoodWeight {
    /// σ_η² = τ_{i+1}/λ.
    #[default]
    TauOverLambda,
    /// σ_η² = τ_{i+1}²/λ.
    TauSqOverLambda,
    /// σ_η² = noise_var·(σ_i²/σ_{i+1}²)/λ.
    ///
    /// The transition drift weights the score by σ_{i+1}²/σ_i² relative to the
    /// injected noise; scaling the likelihood by the same factor keeps the
    /// prior/data balance of the true posterior at every scale.
    Matched { noise_var: f64 },
}

impl LikelihoodWeight {
    /// σ_η² for a step at target scale `i`.
    pub fn variance(&self, schedule: &NoiseSchedule, i: usize, lambda: f64) -> Result<f64> {
        let tau_sq = schedule.tau_sq(i + 1)?;
        let v = match *self {
            LikelihoodWeight::TauOverLambda => tau_sq.sqrt() / lambda,
            LikelihoodWeight::TauSqOverLambda => tau_sq / lambda,
            LikelihoodWeight::Matched { noise_var } => {
                noise_var / schedule.drift_ratio(i)? / lambda
            }
        };
        Ok(v)
    }
}

/// Parameters of one posterior sampling run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Langevin steps per noise scale (K).
    pub steps_per_scale: usize,
    /// Index of the scale the initial Gaussian draw lives at (N).
    pub start_index: usize,
    /// Data-consistency factor λ.
    pub lambda: f64,
    pub n_chains: usize,
    /// The burn-in chain covers target scales above this index and the forked
    /// chains run from it down to 1; 0 disables the burn-in.
    pub split_index: usize,
    /// Disable the injected noise (MAP mode).
    pub deterministic: bool,
    pub seed: u64,
    /// Additional Langevin steps at the final scale.
    pub extended_iters: usize,
    pub likelihood: LikelihoodWeight,
    /// Abort once ‖x‖ exceeds this value.
    pub divergence_limit: f64,
    /// Record a trace entry every this many steps (0 disables tracing).
    pub trace_every: usize,
    /// Worker threads for chain-level parallelism (1 = sequential, 0 = one per core).
    pub threads: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            steps_per_scale: 5,
            start_index: 2,
            lambda: 1.0,
            n_chains: 1,
            split_index: 0,
            deterministic: false,
            seed: 0,
            extended_iters: 0,
            likelihood: LikelihoodWeight::default(),
            divergence_limit: 1e6,
            trace_every: 0,
            threads: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self, schedule: &NoiseSchedule) -> Result<()> {
        let n = schedule.len();
        if self.start_index < 1 || self.start_index > n {
            return Err(Error::invalid(format!(
                "start_index must lie in 1..={n}, got {}",
                self.start_index
            )));
        }
        if self.split_index > 0 && self.split_index >= self.start_index {
            return Err(Error::invalid(format!(
                "split_index ({}) must lie below start_index ({})",
                self.split_index, self.start_index
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.n_chains == 0 {
            return Err(Error::invalid("n_chains must be at least 1"));
        }
        if let LikelihoodWeight::Matched { noise_var } = self.likelihood {
            if !(noise_var > 0.0 && noise_var.is_finite()) {
                return Err(Error::NonPositiveVariance(noise_var));
            }
        }
        if !(self.divergence_limit > 0.0) {
            return Err(Error::invalid("divergence_limit must be positive"));
        }
        Ok(())
    }
}
