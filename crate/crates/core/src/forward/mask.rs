use rand::Rng;

use crate::domain::rng::{stream_rng, streams};
use crate::error::{Error, Result};

/// Cartesian k-space sampling pattern. Rows are phase-encode lines.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMask {
    height: usize,
    width: usize,
    grid: Vec<bool>,
    center_block: Option<usize>,
}

/// Parameters for [`SamplingMask::make`].
#[derive(Debug, Clone, PartialEq)]
pub enum MaskSpec {
    Full,
    /// Keep every second phase-encode line, starting at line 0.
    SkipOddEven,
    /// Keep each phase-encode line independently with probability `probability`.
    UniformRandom { probability: f64, seed: u64 },
    /// Fully sampled `center × center` block plus radially decaying random
    /// samples until `fraction` of the grid is acquired.
    VariableDensity {
        fraction: f64,
        center: usize,
        /// Falloff exponent of the outer sampling density (1 − r/r_max)^exponent.
        exponent: f64,
        /// Dart-throwing minimum distance between outer samples, in grid cells.
        min_distance: f64,
        seed: u64,
    },
}

impl SamplingMask {
    pub fn from_grid(height: usize, width: usize, grid: Vec<bool>) -> Result<Self> {
        if grid.len() != height * width {
            return Err(Error::shape(height * width, grid.len()));
        }
        if !grid.iter().any(|&b| b) {
            return Err(Error::invalid("sampling mask acquires no k-space location"));
        }
        Ok(SamplingMask { height, width, grid, center_block: None })
    }

    pub fn full(height: usize, width: usize) -> Self {
        SamplingMask {
            height,
            width,
            grid: vec![true; height * width],
            center_block: None,
        }
    }

    pub fn make(height: usize, width: usize, spec: &MaskSpec) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("mask dimensions must be positive"));
        }
        match *spec {
            MaskSpec::Full => Ok(Self::full(height, width)),
            MaskSpec::SkipOddEven => {
                let grid = (0..height * width).map(|k| (k / width) % 2 == 0).collect();
                Self::from_grid(height, width, grid)
            }
            MaskSpec::UniformRandom { probability, seed } => {
                if !(probability > 0.0 && probability <= 1.0) {
                    return Err(Error::invalid(format!(
                        "line probability must lie in (0, 1], got {probability}"
                    )));
                }
                let mut rng = stream_rng(seed, streams::MASK);
                let lines: Vec<bool> = (0..height).map(|_| rng.gen::<f64>() < probability).collect();
                let grid = (0..height * width).map(|k| lines[k / width]).collect();
                Self::from_grid(height, width, grid)
            }
            MaskSpec::VariableDensity { fraction, center, exponent, min_distance, seed } => {
                variable_density(height, width, fraction, center, exponent, min_distance, seed)
            }
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn grid(&self) -> &[bool] {
        &self.grid
    }

    pub fn is_acquired(&self, row: usize, col: usize) -> bool {
        self.grid[row * self.width + col]
    }

    pub fn acquired_count(&self) -> usize {
        self.grid.iter().filter(|&&b| b).count()
    }

    pub fn acquired_fraction(&self) -> f64 {
        self.acquired_count() as f64 / self.grid.len() as f64
    }

    /// Flat indices of acquired locations, increasing.
    pub fn locations(&self) -> Vec<usize> {
        self.grid
            .iter()
            .enumerate()
            .filter_map(|(k, &b)| b.then_some(k))
            .collect()
    }

    pub fn center_block(&self) -> Option<usize> {
        self.center_block
    }

    /// Checks the fully-sampled-center flag against the grid content.
    pub fn center_block_consistent(&self) -> bool {
        match self.center_block {
            None => true,
            Some(c) => center_indices(self.height, self.width, c)
                .all(|(r, col)| self.is_acquired(r, col)),
        }
    }

    /// Acquired phase-encode lines (rows containing at least one sample).
    pub fn acquired_lines(&self) -> Vec<usize> {
        (0..self.height)
            .filter(|&r| (0..self.width).any(|c| self.is_acquired(r, c)))
            .collect()
    }
}

fn center_indices(height: usize, width: usize, size: usize) -> impl Iterator<Item = (usize, usize)> {
    let r0 = height / 2 - size / 2;
    let c0 = width / 2 - size / 2;
    (r0..r0 + size).flat_map(move |r| (c0..c0 + size).map(move |c| (r, c)))
}

#[allow(clippy::too_many_arguments)]
fn variable_density(
    height: usize,
    width: usize,
    fraction: f64,
    center: usize,
    exponent: f64,
    min_distance: f64,
    seed: u64,
) -> Result<SamplingMask> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    if center > height.min(width) {
        return Err(Error::invalid(format!(
            "center block {center} larger than {height}x{width} grid"
        )));
    }
    if !(exponent >= 0.0 && exponent.is_finite()) {
        return Err(Error::invalid("density exponent must be nonnegative"));
    }
    if !(min_distance >= 0.0 && min_distance.is_finite()) {
        return Err(Error::invalid("min_distance must be nonnegative"));
    }
    let total = height * width;
    let target = ((fraction * total as f64).round() as usize).max(1);
    if center * center > target {
        return Err(Error::invalid(format!(
            "center block of {} samples exceeds the {target}-sample budget",
            center * center
        )));
    }

    let mut grid = vec![false; total];
    for (r, c) in center_indices(height, width, center) {
        grid[r * width + c] = true;
    }
    let mut count = center * center;

    let cy = height as f64 / 2.0;
    let cx = width as f64 / 2.0;
    let r_max = (cy * cy + cx * cx).sqrt() + 1.0;

    // weighted random order (Efraimidis–Spirakis keys u^(1/w))
    let mut rng = stream_rng(seed, streams::MASK);
    let mut candidates: Vec<(f64, usize)> = (0..total)
        .filter(|&k| !grid[k])
        .map(|k| {
            let r = ((k / width) as f64 - cy).hypot((k % width) as f64 - cx);
            let weight = (1.0 - r / r_max).max(1e-9).powf(exponent);
            let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            (u.ln() / weight, k)
        })
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let reach = min_distance.ceil() as isize;
    let too_close = |grid: &[bool], k: usize| -> bool {
        if reach == 0 {
            return false;
        }
        let (r, c) = ((k / width) as isize, (k % width) as isize);
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                if (dr == 0 && dc == 0) || ((dr * dr + dc * dc) as f64) >= min_distance * min_distance {
                    continue;
                }
                let (rr, cc) = (r + dr, c + dc);
                if rr >= 0 && cc >= 0 && (rr as usize) < height && (cc as usize) < width
                    && grid[rr as usize * width + cc as usize]
                {
                    return true;
                }
            }
        }
        false
    };

    let mut deferred = Vec::new();
    for &(_, k) in &candidates {
        if count >= target {
            break;
        }
        if too_close(&grid, k) {
            deferred.push(k);
        } else {
            grid[k] = true;
            count += 1;
        }
    }
    // top up without the distance constraint when the budget was not reached
    for k in deferred {
        if count >= target {
            break;
        }
        grid[k] = true;
        count += 1;
    }

    let mut mask = SamplingMask::from_grid(height, width, grid)?;
    mask.center_block = Some(center);
    Ok(mask)
}
