//! Score fields s(x, i) ≈ ∇ log p_i(x), where p_i is the prior convolved with
//! CN(0, σ_i² I).
//!
//! Gradients follow the complex convention ∇ = ½(∂/∂Re + i ∂/∂Im), under
//! which the score of CN(μ, v I) is (μ − x)/v.

mod gaussian;
mod gmm;
pub(crate) mod linalg;

pub use gaussian::GaussianPrior;
pub use gmm::{gmm_exact_posterior, GmmComponent, GmmPosterior, GmmPrior, PosteriorComponent};

use num_complex::Complex64;

use crate::domain::{ComplexImage, NoiseSchedule};
use crate::error::Result;

pub trait ScorePrior: Send + Sync {
    /// Writes s(x, i) into `out` (same length as `x`).
    fn score_into(
        &self,
        x: &ComplexImage,
        index: usize,
        schedule: &NoiseSchedule,
        out: &mut [Complex64],
    ) -> Result<()>;

    fn score(&self, x: &ComplexImage, index: usize, schedule: &NoiseSchedule) -> Result<ComplexImage> {
        let mut out = ComplexImage::zeros(x.height(), x.width());
        self.score_into(x, index, schedule, out.as_mut_slice())?;
        Ok(out)
    }

    /// Whether the noised marginals have a closed form the sampler can be checked against.
    fn supports_exact_posterior(&self) -> bool {
        false
    }
}
