use std::f64::consts::PI;

use num_complex::Complex64;

use crate::domain::ComplexImage;
use crate::error::{Error, Result};

pub const MAX_DFT_SIDE: usize = 16;

/// Direct O(n⁴) unitary 2-D DFT.
pub fn naive_dft(x: &ComplexImage) -> Result<ComplexImage> {
    transform(x, -1.0)
}

pub fn naive_idft(x: &ComplexImage) -> Result<ComplexImage> {
    transform(x, 1.0)
}

fn transform(x: &ComplexImage, sign: f64) -> Result<ComplexImage> {
    let (h, w) = x.shape();
    if h > MAX_DFT_SIDE || w > MAX_DFT_SIDE {
        return Err(Error::OracleLimit(format!(
            "naive DFT limited to {MAX_DFT_SIDE}x{MAX_DFT_SIDE}, got {h}x{w}"
        )));
    }
    let norm = 1.0 / ((h * w) as f64).sqrt();
    Ok(ComplexImage::from_fn(h, w, |ku, kv| {
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..h {
            for c in 0..w {
                let phase = sign * 2.0 * PI * ((ku * r) as f64 / h as f64 + (kv * c) as f64 / w as f64);
                acc += x.get(r, c) * Complex64::from_polar(1.0, phase);
            }
        }
        acc * norm
    }))
}
