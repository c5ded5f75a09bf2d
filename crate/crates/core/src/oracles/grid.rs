use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_GRID_EVALUATIONS: usize = 20_000_000;

/// Rectangular grid over the complex plane (real part along x, imaginary along y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub nx: usize,
    pub ny: usize,
    /// Midpoint-rule evaluations per cell side.
    pub subsamples: usize,
}

impl GridSpec {
    pub fn square(half_width: f64, cells: usize) -> Self {
        GridSpec {
            re_min: -half_width,
            re_max: half_width,
            im_min: -half_width,
            im_max: half_width,
            nx: cells,
            ny: cells,
            subsamples: 5,
        }
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    fn dx(&self) -> f64 {
        (self.re_max - self.re_min) / self.nx as f64
    }

    fn dy(&self) -> f64 {
        (self.im_max - self.im_min) / self.ny as f64
    }

    /// Row-major cell index (x fastest) of a point, if inside the grid.
    pub fn cell_of(&self, z: Complex64) -> Option<usize> {
        let fx = (z.re - self.re_min) / self.dx();
        let fy = (z.im - self.im_min) / self.dy();
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        (ix < self.nx && iy < self.ny).then_some(iy * self.nx + ix)
    }

    pub fn cell_center(&self, cell: usize) -> Complex64 {
        let (ix, iy) = (cell % self.nx, cell / self.nx);
        Complex64::new(
            self.re_min + (ix as f64 + 0.5) * self.dx(),
            self.im_min + (iy as f64 + 0.5) * self.dy(),
        )
    }

    fn validate(&self) -> Result<()> {
        if !(self.re_max > self.re_min && self.im_max > self.im_min) {
            return Err(Error::invalid("grid extents must be increasing"));
        }
        if self.nx == 0 || self.ny == 0 || self.subsamples == 0 {
            return Err(Error::invalid("grid resolution must be positive"));
        }
        let evals = self.nx * self.ny * self.subsamples * self.subsamples;
        if evals > MAX_GRID_EVALUATIONS {
            return Err(Error::OracleLimit(format!(
                "{evals} density evaluations exceed the {MAX_GRID_EVALUATIONS} limit"
            )));
        }
        Ok(())
    }
}

/// Normalised density tabulated on a grid: Σ density·cell_area = 1.
#[derive(Debug, Clone)]
pub struct GridDensity {
    pub spec: GridSpec,
    pub density: Vec<f64>,
}

impl GridDensity {
    pub fn cell_probabilities(&self) -> Vec<f64> {
        let a = self.spec.cell_area();
        self.density.iter().map(|d| d * a).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.cell_probabilities().iter().sum()
    }

    pub fn mean(&self) -> Complex64 {
        self.cell_probabilities()
            .iter()
            .enumerate()
            .map(|(k, p)| self.spec.cell_center(k) * p)
            .sum()
    }

    /// Probability mass of the cells whose centre satisfies `pred`.
    pub fn mass_where(&self, pred: impl Fn(Complex64) -> bool) -> f64 {
        self.cell_probabilities()
            .iter()
            .enumerate()
            .filter(|(k, _)| pred(self.spec.cell_center(*k)))
            .map(|(_, p)| p)
            .sum()
    }
}

/// Posterior ∝ prior·likelihood on a grid, each cell integrated by the midpoint rule.
pub fn grid_posterior_2d(
    prior: impl Fn(Complex64) -> f64,
    likelihood: impl Fn(Complex64) -> f64,
    spec: GridSpec,
) -> Result<GridDensity> {
    spec.validate()?;
    let s = spec.subsamples;
    let (dx, dy) = (spec.dx(), spec.dy());
    let mut cell_mass = vec![0.0; spec.nx * spec.ny];
    for iy in 0..spec.ny {
        for ix in 0..spec.nx {
            let mut acc = 0.0;
            for sy in 0..s {
                for sx in 0..s {
                    let z = Complex64::new(
                        spec.re_min + (ix as f64 + (sx as f64 + 0.5) / s as f64) * dx,
                        spec.im_min + (iy as f64 + (sy as f64 + 0.5) / s as f64) * dy,
                    );
                    acc += prior(z) * likelihood(z);
                }
            }
            cell_mass[iy * spec.nx + ix] = acc / (s * s) as f64;
        }
    }
    let total: f64 = cell_mass.iter().sum::<f64>() * spec.cell_area();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::invalid("prior × likelihood vanishes (or overflows) on the grid"));
    }
    let density = cell_mass.into_iter().map(|m| m / total).collect();
    Ok(GridDensity { spec, density })
}

/// Fraction of `points` in each grid cell; points off the grid are dropped, so
/// the result sums to the on-grid fraction.
pub fn histogram_2d(points: &[Complex64], spec: &GridSpec) -> Vec<f64> {
    let mut h = vec![0.0; spec.nx * spec.ny];
    let w = 1.0 / points.len() as f64;
    for &z in points {
        if let Some(k) = spec.cell_of(z) {
            h[k] += w;
        }
    }
    h
}

/// Total variation between two cell-probability vectors. Mass missing from
/// either vector is treated as sitting in one common off-grid cell.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let on_grid: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    let off = (p.iter().sum::<f64>() - q.iter().sum::<f64>()).abs();
    0.5 * (on_grid + off)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gauss(m: Complex64, v: f64) -> impl Fn(Complex64) -> f64 {
        move |z| (-(z - m).norm_sqr() / v).exp() / (PI * v)
    }

    #[test]
    fn flat_likelihood_returns_prior() {
        let spec = GridSpec::square(6.0, 60);
        let g = grid_posterior_2d(gauss(Complex64::new(0.5, -0.5), 1.0), |_| 1.0, spec).unwrap();
        assert!((g.total_mass() - 1.0).abs() < 1e-6);
        assert!((g.mean() - Complex64::new(0.5, -0.5)).norm() < 1e-6);
    }

    #[test]
    fn sharp_likelihood_concentrates_mass() {
        let spec = GridSpec::square(4.0, 40);
        let peak = Complex64::new(1.05, 0.95);
        let g = grid_posterior_2d(gauss(Complex64::new(0.0, 0.0), 4.0), gauss(peak, 1e-4), spec).unwrap();
        let k = spec.cell_of(peak).unwrap();
        assert!(g.cell_probabilities()[k] > 0.99);
    }

    #[test]
    fn zero_product_is_an_error() {
        let spec = GridSpec::square(1.0, 10);
        assert!(grid_posterior_2d(|_| 0.0, |_| 1.0, spec).is_err());
    }

    #[test]
    fn oversized_grids_refused() {
        let mut spec = GridSpec::square(1.0, 10_000);
        spec.subsamples = 1;
        assert!(matches!(grid_posterior_2d(|_| 1.0, |_| 1.0, spec), Err(Error::OracleLimit(_))));
    }

    #[test]
    fn tv_bounds() {
        assert_eq!(total_variation(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
        assert!((total_variation(&[1.0, 0.0], &[0.0, 1.0]) - 1.0).abs() < 1e-15);
        assert!((total_variation(&[0.5, 0.0], &[0.5, 0.5]) - 0.5).abs() < 1e-15);
    }
}
