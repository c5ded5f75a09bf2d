use num_complex::Complex64;

use crate::domain::{ComplexImage, NoiseSchedule};
use crate::error::{Error, Result};

/// KL(CN(μ1, σ1² I) ‖ CN(μ2, σ2² I)) for d-dimensional complex vectors.
///
/// With N_p = 2d real dimensions this is
/// N_p·log(σ2/σ1) + (d·σ1² + ‖μ1 − μ2‖²)/σ2² − d.
pub fn kl_gaussians(mu1: &[Complex64], sigma1: f64, mu2: &[Complex64], sigma2: f64) -> Result<f64> {
    for s in [sigma1, sigma2] {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::NonPositiveVariance(s));
        }
    }
    if mu1.len() != mu2.len() {
        return Err(Error::shape(mu1.len(), mu2.len()));
    }
    let d = mu1.len() as f64;
    let np = 2.0 * d;
    let dist: f64 = mu1.iter().zip(mu2).map(|(a, b)| (a - b).norm_sqr()).sum();
    let (v1, v2) = (sigma1 * sigma1, sigma2 * sigma2);
    // d·(v1/v2 − 1 − ln(v1/v2)) is ≥ 0 but cancels badly when v1 ≈ v2
    let ratio = v1 / v2;
    let shape_term = if (ratio - 1.0).abs() < 1e-4 {
        let e = ratio - 1.0;
        d * (e * e / 2.0 - e * e * e / 3.0 + e.powi(4) / 4.0)
    } else {
        np * (sigma2 / sigma1).ln() + d * ratio - d
    };
    Ok(shape_term + dist / v2)
}

/// Mean and variance of q(x_{i−1} | x_i, x₀) = CN(a·x_i + (1 − a)·x₀, τ_i² I),
/// a = σ_{i−1}²/σ_i².
pub fn forward_posterior_params(
    schedule: &NoiseSchedule,
    i: usize,
    x_i: &ComplexImage,
    x_0: &ComplexImage,
) -> Result<(ComplexImage, f64)> {
    schedule.check_index(i)?;
    let a = schedule.sigma_sq(i - 1)? / schedule.sigma_sq(i)?;
    let mean = x_i.zip_map(x_0, |xi, x0| xi * a + x0 * (1.0 - a))?;
    Ok((mean, schedule.tau_sq(i)?))
}
