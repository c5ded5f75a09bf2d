use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Unitary 2-D FFT on row-major buffers (1/√(hw) in both directions).
#[derive(Clone)]
pub struct Fft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
            scale: 1.0 / ((height * width) as f64).sqrt(),
        }
    }

    pub fn forward(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        self.run(data, scratch, false);
    }

    pub fn inverse(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        self.run(data, scratch, true);
    }

    fn run(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>, inverse: bool) {
        let (h, w) = (self.height, self.width);
        debug_assert_eq!(data.len(), h * w);
        if h * w == 1 {
            return;
        }
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        if w > 1 {
            row.process(data);
        }
        if h > 1 {
            // columns: transpose into scratch, transform rows of the transpose, copy back
            scratch.clear();
            scratch.resize(h * w, Complex64::new(0.0, 0.0));
            for r in 0..h {
                for c in 0..w {
                    scratch[c * h + r] = data[r * w + c];
                }
            }
            col.process(scratch);
            for r in 0..h {
                for c in 0..w {
                    data[r * w + c] = scratch[c * h + r];
                }
            }
        }
        for v in data.iter_mut() {
            *v *= self.scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_parseval() {
        let (h, w) = (6, 5);
        let x: Vec<Complex64> = (0..h * w)
            .map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()))
            .collect();
        let fft = Fft2::new(h, w);
        let mut y = x.clone();
        let mut scratch = Vec::new();
        fft.forward(&mut y, &mut scratch);
        let ex: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let ey: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        assert!((ex - ey).abs() < 1e-12 * ex);
        fft.inverse(&mut y, &mut scratch);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
