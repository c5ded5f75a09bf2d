use serde::{Deserialize, Serialize};

use crate::domain::ComplexImage;
use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 7;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Peak value used by PSNR/SSIM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RangePolicy {
    /// Maximum of the normalized reference magnitude.
    #[default]
    PerSliceMax,
    Fixed { range: f64 },
}

impl RangePolicy {
    fn resolve(self, reference: &[f64]) -> Result<f64> {
        let r = match self {
            RangePolicy::PerSliceMax => reference.iter().copied().fold(0.0, f64::max),
            RangePolicy::Fixed { range } => range,
        };
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::invalid(format!("data range must be positive, got {r}")));
        }
        Ok(r)
    }
}

/// |x| scaled to unit ℓ2 norm (left as zeros for a zero image).
pub fn normalized_magnitude(x: &ComplexImage) -> Vec<f64> {
    let m = x.magnitude();
    let norm = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return m;
    }
    m.into_iter().map(|v| v / norm).collect()
}

pub fn psnr_from_mse(mse: f64, range: f64) -> f64 {
    if mse == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (range * range / mse).log10()
}

/// PSNR in dB of ℓ2-normalized magnitudes; `f64::INFINITY` when they coincide.
pub fn psnr(x: &ComplexImage, reference: &ComplexImage, policy: RangePolicy) -> Result<f64> {
    reference.check_shape(x)?;
    let a = normalized_magnitude(x);
    let b = normalized_magnitude(reference);
    let range = policy.resolve(&b)?;
    let mse = a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / a.len() as f64;
    Ok(psnr_from_mse(mse, range))
}

/// SSIM of ℓ2-normalized magnitudes.
pub fn ssim(x: &ComplexImage, reference: &ComplexImage, policy: RangePolicy) -> Result<f64> {
    reference.check_shape(x)?;
    let a = normalized_magnitude(x);
    let b = normalized_magnitude(reference);
    let range = policy.resolve(&b)?;
    ssim_magnitude(&a, &b, x.height(), x.width(), range)
}

/// Summed-area table with a zero first row and column.
fn integral(v: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut s = vec![0.0; (h + 1) * (w + 1)];
    for r in 0..h {
        let mut row = 0.0;
        for c in 0..w {
            row += v[r * w + c];
            s[(r + 1) * (w + 1) + c + 1] = s[r * (w + 1) + c + 1] + row;
        }
    }
    s
}

/// Mean SSIM over all fully contained 7×7 uniform windows, with sample
/// (n − 1) covariances.
pub fn ssim_magnitude(x: &[f64], y: &[f64], height: usize, width: usize, range: f64) -> Result<f64> {
    if x.len() != height * width || y.len() != x.len() {
        return Err(Error::shape(height * width, x.len().max(y.len())));
    }
    if height < SSIM_WINDOW || width < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {height}x{width}"
        )));
    }
    if !(range > 0.0) {
        return Err(Error::invalid("data range must be positive"));
    }
    let prod = |f: fn(f64, f64) -> f64| x.iter().zip(y).map(|(a, b)| f(*a, *b)).collect::<Vec<_>>();
    let tables = [
        integral(x, height, width),
        integral(y, height, width),
        integral(&prod(|a, _| a * a), height, width),
        integral(&prod(|_, b| b * b), height, width),
        integral(&prod(|a, b| a * b), height, width),
    ];
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let cov_norm = n / (n - 1.0);
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let stride = width + 1;
    let mut total = 0.0;
    let mut count = 0usize;
    for r in 0..=height - SSIM_WINDOW {
        for c in 0..=width - SSIM_WINDOW {
            let (r1, c1i) = (r + SSIM_WINDOW, c + SSIM_WINDOW);
            let sum = |t: &Vec<f64>| (t[r1 * stride + c1i] - t[r * stride + c1i] - t[r1 * stride + c] + t[r * stride + c]) / n;
            let (mx, my) = (sum(&tables[0]), sum(&tables[1]));
            let vx = cov_norm * (sum(&tables[2]) - mx * mx);
            let vy = cov_norm * (sum(&tables[3]) - my * my);
            let vxy = cov_norm * (sum(&tables[4]) - mx * my);
            total += ((2.0 * mx * my + c1) * (2.0 * vxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}
