use std::f64::consts::PI;

use num_complex::Complex64;

use super::ScorePrior;
use crate::domain::{ComplexImage, NoiseSchedule};
use crate::error::{Error, Result};

/// Independent complex Gaussian per pixel: x_p ~ CN(mean_p, variance_p).
///
/// The isotropic case has the same variance everywhere; per-pixel variances
/// let tests encode a known object support.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrior {
    mean: ComplexImage,
    variance: Vec<f64>,
}

impl GaussianPrior {
    pub fn isotropic(mean: ComplexImage, variance: f64) -> Result<Self> {
        let n = mean.len();
        Self::diagonal(mean, vec![variance; n])
    }

    pub fn diagonal(mean: ComplexImage, variance: Vec<f64>) -> Result<Self> {
        if variance.len() != mean.len() {
            return Err(Error::shape(mean.len(), variance.len()));
        }
        if let Some(&v) = variance.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::NonPositiveVariance(v));
        }
        Ok(GaussianPrior { mean, variance })
    }

    pub fn mean(&self) -> &ComplexImage {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    /// log density of the prior convolved with CN(0, sigma_sq I).
    pub fn log_density(&self, x: &ComplexImage, sigma_sq: f64) -> Result<f64> {
        self.mean.check_shape(x)?;
        Ok(x
            .as_slice()
            .iter()
            .zip(self.mean.as_slice())
            .zip(&self.variance)
            .map(|((xi, mi), v)| {
                let t = v + sigma_sq;
                -(xi - mi).norm_sqr() / t - (PI * t).ln()
            })
            .sum())
    }
}

impl ScorePrior for GaussianPrior {
    fn score_into(
        &self,
        x: &ComplexImage,
        index: usize,
        schedule: &NoiseSchedule,
        out: &mut [Complex64],
    ) -> Result<()> {
        self.mean.check_shape(x)?;
        let sigma_sq = schedule.sigma_sq(index)?;
        for (((o, xi), mi), v) in out.iter_mut().zip(x.as_slice()).zip(self.mean.as_slice()).zip(&self.variance) {
            *o = (mi - xi) / (v + sigma_sq);
        }
        Ok(())
    }

    fn supports_exact_posterior(&self) -> bool {
        true
    }
}
