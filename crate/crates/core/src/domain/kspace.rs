use num_complex::Complex64;

use crate::error::{Error, Result};

/// Acquired k-space samples.
///
/// `locations` are flat row-major indices into the `height × width` grid,
/// strictly increasing. `samples` is coil-major: entry `c * locations.len() + j`
/// holds coil `c` at location `locations[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpaceData {
    height: usize,
    width: usize,
    coils: usize,
    locations: Vec<usize>,
    samples: Vec<Complex64>,
}

impl KSpaceData {
    pub fn new(
        height: usize,
        width: usize,
        coils: usize,
        locations: Vec<usize>,
        samples: Vec<Complex64>,
    ) -> Result<Self> {
        if coils == 0 {
            return Err(Error::invalid("k-space data needs at least one coil"));
        }
        if locations.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("k-space locations must be strictly increasing"));
        }
        if let Some(&last) = locations.last() {
            if last >= height * width {
                return Err(Error::invalid(format!(
                    "k-space location {last} outside {height}x{width} grid"
                )));
            }
        }
        if samples.len() != locations.len() * coils {
            return Err(Error::shape(
                format!("{} samples", locations.len() * coils),
                format!("{} samples", samples.len()),
            ));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite k-space sample"));
        }
        Ok(KSpaceData { height, width, coils, locations, samples })
    }

    pub(crate) fn from_parts_unchecked(
        height: usize,
        width: usize,
        coils: usize,
        locations: Vec<usize>,
        samples: Vec<Complex64>,
    ) -> Self {
        KSpaceData { height, width, coils, locations, samples }
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn coils(&self) -> usize {
        self.coils
    }

    pub fn locations(&self) -> &[usize] {
        &self.locations
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn coil(&self, c: usize) -> &[Complex64] {
        let n = self.locations.len();
        &self.samples[c * n..(c + 1) * n]
    }

    /// Inner product Σ conj(self)·other over all samples.
    pub fn dot(&self, other: &KSpaceData) -> Complex64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_sqr()).sum()
    }
}
