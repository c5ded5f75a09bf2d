use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::rng::{stream_rng, streams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConditioningMode {
    /// Learnable per-scale scale/shift tables Φ, Ω ∈ ℝ^{N×C}.
    Discrete,
    /// Frozen random Fourier features of the index, projected onto a shift.
    Fourier { features: usize, std: f64 },
}

impl Default for ConditioningMode {
    fn default() -> Self {
        ConditioningMode::Fourier { features: 16, std: 1.0 }
    }
}

/// How a network learns which noise scale it is looking at.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConditioning {
    mode: ConditioningMode,
    n_scales: usize,
    frequencies: Vec<f64>,
}

impl NoiseConditioning {
    pub fn discrete(n_scales: usize) -> Result<Self> {
        if n_scales == 0 {
            return Err(Error::invalid("conditioning needs at least one scale"));
        }
        Ok(NoiseConditioning { mode: ConditioningMode::Discrete, n_scales, frequencies: Vec::new() })
    }

    /// Draws the m frequencies w ~ N(0, std²) once; they never change afterwards.
    pub fn fourier(n_scales: usize, features: usize, std: f64, seed: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, streams::INIT | 1);
        let frequencies = (0..features).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
        Self::fourier_with_frequencies(n_scales, std, frequencies)
    }

    pub fn fourier_with_frequencies(n_scales: usize, std: f64, frequencies: Vec<f64>) -> Result<Self> {
        if n_scales == 0 {
            return Err(Error::invalid("conditioning needs at least one scale"));
        }
        if frequencies.is_empty() {
            return Err(Error::invalid("Fourier embedding size must be positive"));
        }
        if !(std > 0.0 && std.is_finite()) || frequencies.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("Fourier frequencies must be finite with positive spread"));
        }
        let mode = ConditioningMode::Fourier { features: frequencies.len(), std };
        Ok(NoiseConditioning { mode, n_scales, frequencies })
    }

    pub fn new(mode: ConditioningMode, n_scales: usize, seed: u64) -> Result<Self> {
        match mode {
            ConditioningMode::Discrete => Self::discrete(n_scales),
            ConditioningMode::Fourier { features, std } => Self::fourier(n_scales, features, std, seed),
        }
    }

    pub fn mode(&self) -> ConditioningMode {
        self.mode
    }

    pub fn n_scales(&self) -> usize {
        self.n_scales
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Length of [`embed`](Self::embed): 2m in Fourier mode, 0 in discrete mode.
    pub fn embedding_len(&self) -> usize {
        2 * self.frequencies.len()
    }

    pub fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.n_scales {
            return Err(Error::IndexOutOfRange { index: i, max: self.n_scales });
        }
        Ok(())
    }

    /// [sin(2π i w), cos(2π i w)].
    pub fn embed(&self, i: usize) -> Result<Vec<f64>> {
        self.check_index(i)?;
        let mut out = Vec::with_capacity(self.embedding_len());
        out.extend(self.frequencies.iter().map(|w| (2.0 * PI * i as f64 * w).sin()));
        out.extend(self.frequencies.iter().map(|w| (2.0 * PI * i as f64 * w).cos()));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_layout() {
        let c = NoiseConditioning::fourier_with_frequencies(10, 1.0, vec![0.25, 0.1]).unwrap();
        let e = c.embed(1).unwrap();
        assert_eq!(e.len(), 4);
        assert!((e[0] - 1.0).abs() < 1e-15);
        assert!((e[1] - (0.2 * PI).sin()).abs() < 1e-15);
        assert!(e[2].abs() < 1e-15);
        assert!((e[3] - (0.2 * PI).cos()).abs() < 1e-15);
    }

    #[test]
    fn embedding_is_frozen() {
        let c = NoiseConditioning::fourier(20, 16, 1.0, 7).unwrap();
        let a = c.embed(5).unwrap();
        for _ in 0..3 {
            assert_eq!(a, c.embed(5).unwrap());
        }
        assert_eq!(c, NoiseConditioning::fourier(20, 16, 1.0, 7).unwrap());
        assert_ne!(c.frequencies(), NoiseConditioning::fourier(20, 16, 1.0, 8).unwrap().frequencies());
    }

    #[test]
    fn frequency_spread_follows_std() {
        let c = NoiseConditioning::fourier(1, 20_000, 3.0, 1).unwrap();
        let var = c.frequencies().iter().map(|w| w * w).sum::<f64>() / 20_000.0;
        assert!((var.sqrt() - 3.0).abs() < 0.1);
    }

    #[test]
    fn index_range_is_enforced() {
        let c = NoiseConditioning::discrete(4).unwrap();
        assert!(c.check_index(0).is_err());
        assert!(c.check_index(5).is_err());
        c.check_index(4).unwrap();
        assert!(NoiseConditioning::fourier(4, 2, 1.0, 0).unwrap().embed(0).is_err());
        assert!(NoiseConditioning::fourier(4, 0, 1.0, 0).is_err());
    }
}
