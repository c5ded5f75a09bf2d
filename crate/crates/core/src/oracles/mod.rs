//! Brute-force and closed-form references for verification.
//!
//! Nothing here shares numerical kernels with the code it checks: the DFT is
//! a direct summation, Gaussian algebra is written out per case, and grid
//! posteriors integrate densities numerically. Inputs are limited to desk
//! scale and larger requests are refused.

mod dft;
mod gaussian;
mod grid;
mod metrics;
mod montecarlo;

pub use dft::{naive_dft, naive_idft, MAX_DFT_SIDE};
pub use gaussian::{
    conjugate_scalar_posterior, grid_bayes_forward_posterior, langevin_stationary_scalar,
    ScalarGaussian,
};
pub use grid::{grid_posterior_2d, histogram_2d, total_variation, GridDensity, GridSpec};
pub use metrics::{naive_psnr, naive_ssim};
pub use montecarlo::{mc_kl, McEstimate, MIN_MC_DRAWS};

use num_complex::Complex64;

use crate::domain::ComplexImage;

/// Central-difference estimate of ½(∂/∂Re + i ∂/∂Im) f at every pixel, the
/// gradient convention used for scores of complex Gaussian densities.
pub fn wirtinger_gradient(mut f: impl FnMut(&ComplexImage) -> f64, x: &ComplexImage, step: f64) -> ComplexImage {
    let mut probe = x.clone();
    let mut out = ComplexImage::zeros(x.height(), x.width());
    for p in 0..x.len() {
        let base = x.as_slice()[p];
        probe.as_mut_slice()[p] = base + Complex64::new(step, 0.0);
        let fp = f(&probe);
        probe.as_mut_slice()[p] = base - Complex64::new(step, 0.0);
        let fm = f(&probe);
        let d_re = (fp - fm) / (2.0 * step);
        probe.as_mut_slice()[p] = base + Complex64::new(0.0, step);
        let fp = f(&probe);
        probe.as_mut_slice()[p] = base - Complex64::new(0.0, step);
        let fm = f(&probe);
        let d_im = (fp - fm) / (2.0 * step);
        probe.as_mut_slice()[p] = base;
        out.as_mut_slice()[p] = Complex64::new(0.5 * d_re, 0.5 * d_im);
    }
    out
}
