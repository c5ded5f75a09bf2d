use crate::error::{Error, Result};

pub const MIN_MC_DRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Monte Carlo estimate of KL(p‖q) = E_p[log p − log q] with its standard error.
pub fn mc_kl<T>(
    mut sample_p: impl FnMut() -> T,
    log_p: impl Fn(&T) -> f64,
    log_q: impl Fn(&T) -> f64,
    draws: usize,
) -> Result<McEstimate> {
    if draws < MIN_MC_DRAWS {
        return Err(Error::invalid(format!("need at least {MIN_MC_DRAWS} draws, got {draws}")));
    }
    // Welford accumulation
    let (mut mean, mut m2) = (0.0, 0.0);
    for k in 0..draws {
        let x = sample_p();
        let d = log_p(&x) - log_q(&x);
        let delta = d - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (d - mean);
    }
    let var = m2 / (draws - 1) as f64;
    Ok(McEstimate { mean, stderr: (var / draws as f64).sqrt() })
}
