//! Point estimates, uncertainty maps and image-quality metrics from posterior samples.

mod gaussian;
mod metrics;

pub use gaussian::{forward_posterior_params, kl_gaussians};
pub use metrics::{normalized_magnitude, psnr, psnr_from_mse, ssim, ssim_magnitude, RangePolicy, SSIM_K1, SSIM_K2, SSIM_WINDOW};

use num_complex::Complex64;

use crate::domain::ComplexImage;
use crate::error::{Error, Result};

/// Final-scale samples of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    samples: Vec<ComplexImage>,
    pub seed: u64,
    pub config_hash: u64,
}

impl SampleSet {
    pub fn new(samples: Vec<ComplexImage>) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::invalid("sample set is empty"))?;
        if let Some(bad) = samples.iter().find(|s| s.shape() != first.shape()) {
            return Err(Error::shape(
                format!("{}x{}", first.height(), first.width()),
                format!("{}x{}", bad.height(), bad.width()),
            ));
        }
        Ok(SampleSet { samples, seed: 0, config_hash: 0 })
    }

    pub fn with_metadata(mut self, seed: u64, config_hash: u64) -> Self {
        self.seed = seed;
        self.config_hash = config_hash;
        self
    }

    pub fn samples(&self) -> &[ComplexImage] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.samples[0].shape()
    }

    pub fn scale(&self, factor: f64) -> SampleSet {
        SampleSet { samples: self.samples.iter().map(|s| s.scale(factor)).collect(), ..*self }
    }
}

/// Pixelwise complex mean of the samples.
pub fn mmse(set: &SampleSet) -> ComplexImage {
    let (h, w) = set.shape();
    let n = set.len() as f64;
    let mut acc = vec![Complex64::new(0.0, 0.0); h * w];
    for s in set.samples() {
        for (a, v) in acc.iter_mut().zip(s.as_slice()) {
            *a += v;
        }
    }
    ComplexImage::from_fn(h, w, |r, c| acc[r * w + c] / n)
}

/// Unbiased per-pixel variance of the complex samples, E|x − x̄|².
pub fn complex_variance(set: &SampleSet) -> Result<Vec<f64>> {
    if set.len() < 2 {
        return Err(Error::invalid("variance needs at least two samples"));
    }
    let mean = mmse(set);
    let mut var = vec![0.0; mean.len()];
    for s in set.samples() {
        for ((v, x), m) in var.iter_mut().zip(s.as_slice()).zip(mean.as_slice()) {
            *v += (x - m).norm_sqr();
        }
    }
    let d = (set.len() - 1) as f64;
    Ok(var.into_iter().map(|v| v / d).collect())
}

/// Per-pixel magnitude statistics with 95% confidence half-widths of the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyMap {
    pub height: usize,
    pub width: usize,
    pub count: usize,
    pub mean_magnitude: Vec<f64>,
    pub variance: Vec<f64>,
    pub ci_half_width: Vec<f64>,
}

impl UncertaintyMap {
    /// 255 where the CI half-width reaches the given percentile (0–100), else 0.
    pub fn ci_overlay(&self, percentile: f64) -> Result<Vec<u8>> {
        if !(0.0..=100.0).contains(&percentile) {
            return Err(Error::invalid(format!("percentile must lie in [0, 100], got {percentile}")));
        }
        let threshold = percentile_value(&self.ci_half_width, percentile);
        Ok(self.ci_half_width.iter().map(|c| if *c >= threshold { 255 } else { 0 }).collect())
    }

    pub fn mean_variance(&self) -> f64 {
        self.variance.iter().sum::<f64>() / self.variance.len() as f64
    }
}

/// Nearest-rank percentile.
pub fn percentile_value(values: &[f64], percentile: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((percentile / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Sample variance of the magnitudes (divisor count − 1) and CI = 1.96·√(var/count).
pub fn variance_map(set: &SampleSet) -> Result<UncertaintyMap> {
    let n = set.len();
    if n < 2 {
        return Err(Error::invalid("variance map needs at least two samples"));
    }
    let (h, w) = set.shape();
    let mut mean = vec![0.0; h * w];
    for s in set.samples() {
        for (m, v) in mean.iter_mut().zip(s.as_slice()) {
            *m += v.norm();
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut variance = vec![0.0; h * w];
    for s in set.samples() {
        for ((acc, v), m) in variance.iter_mut().zip(s.as_slice()).zip(&mean) {
            *acc += (v.norm() - m).powi(2);
        }
    }
    variance.iter_mut().for_each(|v| *v /= (n - 1) as f64);
    let ci_half_width = variance.iter().map(|v| 1.96 * (v / n as f64).sqrt()).collect();
    Ok(UncertaintyMap { height: h, width: w, count: n, mean_magnitude: mean, variance, ci_half_width })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(vals: &[(f64, f64)]) -> ComplexImage {
        ComplexImage::from_vec(1, vals.len(), vals.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap()
    }

    #[test]
    fn identical_samples() {
        let a = img(&[(1.0, 2.0), (-0.5, 0.0)]);
        let set = SampleSet::new(vec![a.clone(); 4]).unwrap();
        assert_eq!(mmse(&set), a);
        let u = variance_map(&set).unwrap();
        assert!(u.variance.iter().all(|v| *v == 0.0));
        assert!(u.ci_half_width.iter().all(|v| *v == 0.0));
        assert!(complex_variance(&set).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn antipodal_samples_average_to_zero() {
        let a = img(&[(1.0, 2.0), (-0.5, 3.0)]);
        let set = SampleSet::new(vec![a.clone(), a.scale(-1.0)]).unwrap();
        assert_eq!(mmse(&set).norm(), 0.0);
    }

    #[test]
    fn variance_and_ci_values() {
        let set = SampleSet::new(vec![img(&[(1.0, 0.0)]), img(&[(0.0, 3.0)]), img(&[(-2.0, 0.0)])]).unwrap();
        let u = variance_map(&set).unwrap();
        // magnitudes 1, 3, 2
        assert!((u.mean_magnitude[0] - 2.0).abs() < 1e-15);
        assert!((u.variance[0] - 1.0).abs() < 1e-15);
        assert!((u.ci_half_width[0] - 1.96 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_sets() {
        assert!(SampleSet::new(vec![]).is_err());
        assert!(SampleSet::new(vec![ComplexImage::zeros(2, 2), ComplexImage::zeros(2, 3)]).is_err());
        let one = SampleSet::new(vec![ComplexImage::zeros(2, 2)]).unwrap();
        assert!(variance_map(&one).is_err());
        assert!(complex_variance(&one).is_err());
    }

    #[test]
    fn overlay_thresholds_at_percentile() {
        let u = UncertaintyMap {
            height: 1,
            width: 4,
            count: 2,
            mean_magnitude: vec![0.0; 4],
            variance: vec![0.0; 4],
            ci_half_width: vec![0.1, 0.4, 0.2, 0.3],
        };
        assert_eq!(u.ci_overlay(50.0).unwrap(), vec![0, 255, 255, 255]);
        assert_eq!(u.ci_overlay(100.0).unwrap(), vec![0, 255, 0, 0]);
        assert_eq!(u.ci_overlay(0.0).unwrap(), vec![255; 4]);
        assert!(u.ci_overlay(101.0).is_err());
    }

    fn arb_set() -> impl Strategy<Value = Vec<Vec<(f64, f64)>>> {
        prop::collection::vec(prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 3), 2..8)
    }

    proptest! {
        #[test]
        fn mmse_is_linear(raw in arb_set(), alpha in -3.0..3.0f64) {
            let set = SampleSet::new(raw.iter().map(|v| img(v)).collect()).unwrap();
            let lhs = mmse(&set.scale(alpha));
            let rhs = mmse(&set).scale(alpha);
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }

        #[test]
        fn variance_map_is_permutation_invariant(raw in arb_set(), shift in 0usize..8) {
            let set = SampleSet::new(raw.iter().map(|v| img(v)).collect()).unwrap();
            let mut rotated = raw.clone();
            let k = shift % rotated.len();
            rotated.rotate_left(k);
            rotated.reverse();
            let other = SampleSet::new(rotated.iter().map(|v| img(v)).collect()).unwrap();
            let a = variance_map(&set).unwrap();
            let b = variance_map(&other).unwrap();
            for (x, y) in a.variance.iter().zip(&b.variance) {
                prop_assert!((x - y).abs() < 1e-12);
                prop_assert!(*x >= 0.0);
            }
        }
    }
}
