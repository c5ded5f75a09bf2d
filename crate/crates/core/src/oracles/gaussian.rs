use num_complex::Complex64;

use crate::error::{Error, Result};

/// Scalar complex Gaussian CN(mean, var); `var` is E|x − mean|².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarGaussian {
    pub mean: Complex64,
    pub var: f64,
}

/// Posterior of x ~ CN(prior_mean, prior_var) given y = gain·x + η, η ~ CN(0, noise_var).
pub fn conjugate_scalar_posterior(
    prior_mean: Complex64,
    prior_var: f64,
    gain: Complex64,
    y: Complex64,
    noise_var: f64,
) -> ScalarGaussian {
    let precision = 1.0 / prior_var + gain.norm_sqr() / noise_var;
    let mean = (prior_mean / prior_var + gain.conj() * y / noise_var) / precision;
    ScalarGaussian { mean, var: 1.0 / precision }
}

/// Stationary law of the scalar linear recursion
///
/// x ← x + prior_step·(prior_mean − x)/prior_var + data_step·conj(gain)·(y − gain·x) + √noise_var·z
///
/// with z ~ CN(0, 1). Errors when the recursion is not contracting.
pub fn langevin_stationary_scalar(
    prior_mean: Complex64,
    prior_var: f64,
    prior_step: f64,
    gain: Complex64,
    y: Complex64,
    data_step: f64,
    noise_var: f64,
) -> Result<ScalarGaussian> {
    let contraction = prior_step / prior_var + data_step * gain.norm_sqr();
    if !(contraction > 0.0 && contraction < 2.0) {
        return Err(Error::invalid(format!(
            "recursion with contraction {contraction} has no stationary law"
        )));
    }
    let mean = (prior_mean * (prior_step / prior_var) + gain.conj() * y * data_step) / contraction;
    let rho = 1.0 - contraction;
    Ok(ScalarGaussian { mean, var: noise_var / (1.0 - rho * rho) })
}

/// Moments of q(x_{i−1} | x_i, x₀) for a scalar complex variable, by numerical
/// integration of q(x_i | x_{i−1})·q(x_{i−1} | x₀) along the real axis.
///
/// Real and imaginary parts decouple, so integrating the real part of real
/// inputs is sufficient; the returned variance is the complex variance
/// (twice the per-component variance).
pub fn grid_bayes_forward_posterior(sigma_prev: f64, sigma_cur: f64, x0: f64, xi: f64) -> Result<(f64, f64)> {
    if !(sigma_prev > 0.0 && sigma_cur > sigma_prev) {
        return Err(Error::invalid("need 0 < sigma_prev < sigma_cur"));
    }
    // per-component variances
    let v_marg = sigma_prev * sigma_prev / 2.0;
    let v_step = (sigma_cur * sigma_cur - sigma_prev * sigma_prev) / 2.0;
    let spread = v_marg.max(v_step).sqrt();
    let lo = x0.min(xi) - 12.0 * spread;
    let hi = x0.max(xi) + 12.0 * spread;
    let cells = 400_000usize;
    let dx = (hi - lo) / cells as f64;
    let log_w = |x: f64| -(xi - x).powi(2) / (2.0 * v_step) - (x - x0).powi(2) / (2.0 * v_marg);
    // shift by the max log weight to keep exp in range
    let peak = (0..=cells).map(|k| log_w(lo + k as f64 * dx)).fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for k in 0..=cells {
        let x = lo + k as f64 * dx;
        let wt = if k == 0 || k == cells { 0.5 } else { 1.0 };
        let p = wt * (log_w(x) - peak).exp();
        z += p;
        m1 += p * x;
        m2 += p * x * x;
    }
    let mean = m1 / z;
    let var = m2 / z - mean * mean;
    Ok((mean, 2.0 * var))
}
