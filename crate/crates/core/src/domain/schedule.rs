use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Noise scales 0 = σ₀ < σ₁ < … < σ_N.
///
/// σ₀ is stored explicitly so `sigma(0)` is well defined and `tau_sq(1) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    sigmas: Vec<f64>,
}

impl NoiseSchedule {
    /// σ_i = σ_min·(σ_max/σ_min)^((i−1)/(N−1)), i = 1..N.
    pub fn geometric(sigma_min: f64, sigma_max: f64, n: usize) -> Result<Self> {
        if !(sigma_min > 0.0 && sigma_min.is_finite()) {
            return Err(Error::invalid(format!("sigma_min must be positive, got {sigma_min}")));
        }
        if !(sigma_max > sigma_min && sigma_max.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma_max ({sigma_max}) must exceed sigma_min ({sigma_min})"
            )));
        }
        if n < 2 {
            return Err(Error::invalid(format!("need at least 2 noise scales, got {n}")));
        }
        let ratio = sigma_max / sigma_min;
        let mut sigmas = Vec::with_capacity(n + 1);
        sigmas.push(0.0);
        for i in 1..=n {
            let t = (i - 1) as f64 / (n - 1) as f64;
            sigmas.push(sigma_min * ratio.powf(t));
        }
        // pin the endpoints against rounding in powf
        sigmas[1] = sigma_min;
        sigmas[n] = sigma_max;
        Self::from_sigmas(sigmas[1..].to_vec())
    }

    /// Builds a schedule from σ₁..σ_N (σ₀ = 0 is implied).
    pub fn from_sigmas(positive: Vec<f64>) -> Result<Self> {
        if positive.is_empty() {
            return Err(Error::invalid("schedule needs at least one positive scale"));
        }
        let mut sigmas = Vec::with_capacity(positive.len() + 1);
        sigmas.push(0.0);
        for (k, &s) in positive.iter().enumerate() {
            let prev = *sigmas.last().unwrap();
            if !(s.is_finite() && s > prev) {
                return Err(Error::invalid(format!(
                    "noise scales must be strictly increasing: sigma_{} = {s} after {prev}",
                    k + 1
                )));
            }
            sigmas.push(s);
        }
        Ok(NoiseSchedule { sigmas })
    }

    /// Number of positive scales N.
    pub fn len(&self) -> usize {
        self.sigmas.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// σ_i for i in 0..=N.
    pub fn sigma(&self, i: usize) -> Result<f64> {
        self.sigmas
            .get(i)
            .copied()
            .ok_or(Error::IndexOutOfRange { index: i, max: self.len() })
    }

    pub fn sigma_sq(&self, i: usize) -> Result<f64> {
        self.sigma(i).map(|s| s * s)
    }

    /// All scales including σ₀ = 0.
    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// τ_i² = (σ_i² − σ_{i−1}²)·σ_{i−1}²/σ_i², the variance of q(x_{i−1} | x_i, x₀).
    pub fn tau_sq(&self, i: usize) -> Result<f64> {
        self.check_index(i)?;
        let s = self.sigmas[i] * self.sigmas[i];
        let p = self.sigmas[i - 1] * self.sigmas[i - 1];
        Ok((s - p) * p / s)
    }

    /// σ_i² − σ_{i−1}², the variance of one forward step q(x_i | x_{i−1}).
    pub fn step_variance(&self, i: usize) -> Result<f64> {
        self.check_index(i)?;
        Ok(self.sigmas[i].powi(2) - self.sigmas[i - 1].powi(2))
    }

    /// σ_{i+1}²/σ_i², the factor by which the transition drift overweights the
    /// score relative to a unit-temperature Langevin step at target scale i.
    pub fn drift_ratio(&self, i: usize) -> Result<f64> {
        self.check_index(i)?;
        if i == self.len() {
            return Err(Error::IndexOutOfRange { index: i + 1, max: self.len() });
        }
        Ok(self.sigmas[i + 1].powi(2) / self.sigmas[i].powi(2))
    }

    pub fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.len() {
            Err(Error::IndexOutOfRange { index: i, max: self.len() })
        } else {
            Ok(())
        }
    }

    /// Stable fingerprint of the scale values, used by checkpoints.
    pub fn hash(&self) -> u64 {
        let mut h = Sha256::new();
        for s in &self.sigmas {
            h.update(s.to_le_bytes());
        }
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn geometric_midpoint() {
        let s = NoiseSchedule::geometric(0.1, 10.0, 3).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.sigma(0).unwrap(), 0.0);
        assert_eq!(s.sigma(1).unwrap(), 0.1);
        assert!((s.sigma(2).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(s.sigma(3).unwrap(), 10.0);
    }

    #[test]
    fn geometric_endpoints_only() {
        let s = NoiseSchedule::geometric(0.01, 1.0, 2).unwrap();
        assert_eq!(s.sigmas(), &[0.0, 0.01, 1.0]);
    }

    #[test]
    fn geometric_matches_independent_formula() {
        // values from evaluating 0.01*(348/0.01)**((i-1)/69) in Python
        let s = NoiseSchedule::geometric(0.01, 348.0, 70).unwrap();
        let expected = [
            (1, 0.01),
            (35, 1.7293369758522426),
            (36, 2.012331921767305),
            (70, 348.0),
        ];
        for (i, v) in expected {
            let got = s.sigma(i).unwrap();
            assert!((got - v).abs() <= 1e-12 * v, "sigma_{i}: {got} vs {v}");
        }
        for i in 1..70 {
            assert!(s.sigma(i + 1).unwrap() > s.sigma(i).unwrap());
        }
    }

    #[test]
    fn geometric_rejects_bad_arguments() {
        assert!(NoiseSchedule::geometric(0.0, 1.0, 5).is_err());
        assert!(NoiseSchedule::geometric(1.0, 1.0, 5).is_err());
        assert!(NoiseSchedule::geometric(2.0, 1.0, 5).is_err());
        assert!(NoiseSchedule::geometric(0.1, 1.0, 1).is_err());
    }

    #[test]
    fn tau_sq_examples() {
        let s = NoiseSchedule::from_sigmas(vec![1.0, 2.0]).unwrap();
        assert_eq!(s.tau_sq(1).unwrap(), 0.0);
        assert!((s.tau_sq(2).unwrap() - 0.75).abs() < 1e-15);
        assert!(matches!(s.tau_sq(0), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(s.tau_sq(3), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn tau_sq_vanishes_for_close_scales() {
        let sigma = 2.0;
        for eps in [1e-2, 1e-4, 1e-6] {
            let s = NoiseSchedule::from_sigmas(vec![sigma - eps, sigma]).unwrap();
            let t = s.tau_sq(2).unwrap();
            assert!(t < eps * 2.0 * sigma, "eps={eps}: tau_sq={t}");
        }
    }

    #[test]
    fn from_sigmas_requires_strict_increase() {
        assert!(NoiseSchedule::from_sigmas(vec![0.1, 0.1]).is_err());
        assert!(NoiseSchedule::from_sigmas(vec![-0.1, 0.1]).is_err());
        assert!(NoiseSchedule::from_sigmas(vec![]).is_err());
    }

    proptest! {
        #[test]
        fn geometric_is_monotone_and_tau_bounded(
            lo in 1e-4f64..1.0,
            factor in 1.001f64..1e4,
            n in 2usize..200,
        ) {
            let s = NoiseSchedule::geometric(lo, lo * factor, n).unwrap();
            prop_assert_eq!(s.sigma(0).unwrap(), 0.0);
            prop_assert_eq!(s.sigma(1).unwrap(), lo);
            prop_assert_eq!(s.sigma(n).unwrap(), lo * factor);
            for i in 1..=n {
                prop_assert!(s.sigma(i).unwrap() > s.sigma(i - 1).unwrap());
                let t = s.tau_sq(i).unwrap();
                let gap = s.sigma_sq(i).unwrap() - s.sigma_sq(i - 1).unwrap();
                prop_assert!(t >= 0.0);
                prop_assert!(t <= gap * (1.0 + 1e-12));
            }
            prop_assert_eq!(s.tau_sq(1).unwrap(), 0.0);
        }
    }
}
