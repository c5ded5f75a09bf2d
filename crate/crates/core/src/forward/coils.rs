use std::f64::consts::PI;

use num_complex::Complex64;

use crate::domain::ComplexImage;
use crate::error::{Error, Result};

/// Coil sensitivity maps S_c, one complex image per receiver coil.
#[derive(Debug, Clone, PartialEq)]
pub struct CoilMaps {
    maps: Vec<ComplexImage>,
}

impl CoilMaps {
    pub fn new(maps: Vec<ComplexImage>) -> Result<Self> {
        let first = maps.first().ok_or_else(|| Error::invalid("need at least one coil map"))?;
        for m in &maps[1..] {
            first.check_shape(m)?;
        }
        Ok(CoilMaps { maps })
    }

    /// Single coil with S ≡ 1.
    pub fn unit(height: usize, width: usize) -> Self {
        CoilMaps {
            maps: vec![ComplexImage::from_fn(height, width, |_, _| Complex64::new(1.0, 0.0))],
        }
    }

    /// Raised-cosine lobes centred at equispaced points on the image boundary,
    /// with a smooth phase ramp, normalised to unit sum-of-squares per pixel.
    pub fn synthetic(height: usize, width: usize, coils: usize) -> Result<Self> {
        if coils == 0 {
            return Err(Error::invalid("coil count must be positive"));
        }
        if coils == 1 {
            return Ok(Self::unit(height, width));
        }
        let cy = (height as f64 - 1.0) / 2.0;
        let cx = (width as f64 - 1.0) / 2.0;
        let radius = 0.5 * height.max(width) as f64;
        let lobe = height.max(width) as f64;
        let mut maps: Vec<ComplexImage> = (0..coils)
            .map(|c| {
                let theta = 2.0 * PI * c as f64 / coils as f64;
                let (py, px) = (cy + radius * theta.sin(), cx + radius * theta.cos());
                ComplexImage::from_fn(height, width, |r, col| {
                    let d = (r as f64 - py).hypot(col as f64 - px) / lobe;
                    let amp = 0.05 + 0.5 * (1.0 + (PI * d.min(1.0)).cos());
                    Complex64::from_polar(amp, theta + PI * d)
                })
            })
            .collect();
        for p in 0..height * width {
            let sos: f64 = maps.iter().map(|m| m.as_slice()[p].norm_sqr()).sum::<f64>().sqrt();
            for m in maps.iter_mut() {
                m.as_mut_slice()[p] /= sos;
            }
        }
        Ok(CoilMaps { maps })
    }

    pub fn coils(&self) -> usize {
        self.maps.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.maps[0].shape()
    }

    pub fn map(&self, c: usize) -> &ComplexImage {
        &self.maps[c]
    }

    pub fn maps(&self) -> &[ComplexImage] {
        &self.maps
    }

    /// Largest deviation of Σ_c |S_c|² from 1 over all pixels.
    pub fn sum_of_squares_error(&self) -> f64 {
        let (h, w) = self.shape();
        (0..h * w)
            .map(|p| {
                let sos: f64 = self.maps.iter().map(|m| m.as_slice()[p].norm_sqr()).sum();
                (sos - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}
