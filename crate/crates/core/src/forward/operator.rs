use num_complex::Complex64;

use super::{CoilMaps, Fft2, SamplingMask};
use crate::domain::rng::{standard_complex_normal, stream_rng, streams};
use crate::domain::{ComplexImage, KSpaceData};
use crate::error::{Error, Result};

/// Work buffers reused across operator applications.
#[derive(Debug, Default, Clone)]
pub struct OperatorWork {
    coil: Vec<Complex64>,
    fft: Vec<Complex64>,
}

/// A = P·F·S with a unitary 2-D Fourier transform.
#[derive(Debug, Clone)]
pub struct ForwardOperator {
    mask: SamplingMask,
    coils: CoilMaps,
    locations: Vec<usize>,
    fft: Fft2,
}

impl ForwardOperator {
    pub fn new(mask: SamplingMask, coils: CoilMaps) -> Result<Self> {
        let shape = (mask.height(), mask.width());
        if coils.shape() != shape {
            return Err(Error::shape(
                format!("{}x{} coil maps", shape.0, shape.1),
                format!("{}x{}", coils.shape().0, coils.shape().1),
            ));
        }
        let locations = mask.locations();
        Ok(ForwardOperator {
            fft: Fft2::new(shape.0, shape.1),
            mask,
            coils,
            locations,
        })
    }

    /// Fully sampled, single unit coil: A is the unitary FFT.
    pub fn identity_fourier(height: usize, width: usize) -> Self {
        Self::new(SamplingMask::full(height, width), CoilMaps::unit(height, width))
            .expect("full mask and unit coil share a shape")
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn coils(&self) -> &CoilMaps {
        &self.coils
    }

    pub fn image_shape(&self) -> (usize, usize) {
        (self.mask.height(), self.mask.width())
    }

    /// Number of measured values: acquired locations × coils.
    pub fn measurement_len(&self) -> usize {
        self.locations.len() * self.coils.coils()
    }

    pub(crate) fn check_image(&self, x: &ComplexImage) -> Result<()> {
        if x.shape() != self.image_shape() {
            let (h, w) = self.image_shape();
            return Err(Error::shape(format!("{h}x{w} image"), format!("{}x{}", x.height(), x.width())));
        }
        Ok(())
    }

    pub(crate) fn check_kspace(&self, y: &KSpaceData) -> Result<()> {
        if y.grid() != self.image_shape() || y.coils() != self.coils.coils() || y.locations() != self.locations {
            return Err(Error::shape(
                format!("{} coils on the operator's mask", self.coils.coils()),
                format!("{} coils, {} locations", y.coils(), y.locations().len()),
            ));
        }
        Ok(())
    }

    pub fn apply(&self, x: &ComplexImage) -> Result<KSpaceData> {
        self.check_image(x)?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.measurement_len()];
        let mut work = OperatorWork::default();
        self.apply_into(x.as_slice(), &mut out, &mut work);
        let (h, w) = self.image_shape();
        Ok(KSpaceData::from_parts_unchecked(h, w, self.coils.coils(), self.locations.clone(), out))
    }

    pub fn adjoint(&self, y: &KSpaceData) -> Result<ComplexImage> {
        self.check_kspace(y)?;
        let (h, w) = self.image_shape();
        let mut out = ComplexImage::zeros(h, w);
        let mut work = OperatorWork::default();
        self.adjoint_into(y.samples(), out.as_mut_slice(), &mut work);
        Ok(out)
    }

    /// AᴴA x.
    pub fn normal(&self, x: &ComplexImage) -> Result<ComplexImage> {
        self.check_image(x)?;
        let mut out = ComplexImage::zeros(x.height(), x.width());
        let mut work = OperatorWork::default();
        self.normal_into(x.as_slice(), out.as_mut_slice(), &mut work);
        Ok(out)
    }

    pub(crate) fn apply_into(&self, x: &[Complex64], out: &mut [Complex64], work: &mut OperatorWork) {
        let n = self.locations.len();
        for (c, map) in self.coils.maps().iter().enumerate() {
            work.coil.clear();
            work.coil.extend(x.iter().zip(map.as_slice()).map(|(v, s)| v * s));
            self.fft.forward(&mut work.coil, &mut work.fft);
            for (j, &loc) in self.locations.iter().enumerate() {
                out[c * n + j] = work.coil[loc];
            }
        }
    }

    pub(crate) fn adjoint_into(&self, y: &[Complex64], out: &mut [Complex64], work: &mut OperatorWork) {
        let n = self.locations.len();
        out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (c, map) in self.coils.maps().iter().enumerate() {
            work.coil.clear();
            work.coil.resize(out.len(), Complex64::new(0.0, 0.0));
            for (j, &loc) in self.locations.iter().enumerate() {
                work.coil[loc] = y[c * n + j];
            }
            self.fft.inverse(&mut work.coil, &mut work.fft);
            for ((o, v), s) in out.iter_mut().zip(&work.coil).zip(map.as_slice()) {
                *o += s.conj() * v;
            }
        }
    }

    pub(crate) fn normal_into(&self, x: &[Complex64], out: &mut [Complex64], work: &mut OperatorWork) {
        out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        let grid = self.mask.grid();
        for map in self.coils.maps() {
            work.coil.clear();
            work.coil.extend(x.iter().zip(map.as_slice()).map(|(v, s)| v * s));
            self.fft.forward(&mut work.coil, &mut work.fft);
            for (v, &keep) in work.coil.iter_mut().zip(grid) {
                if !keep {
                    *v = Complex64::new(0.0, 0.0);
                }
            }
            self.fft.inverse(&mut work.coil, &mut work.fft);
            for ((o, v), s) in out.iter_mut().zip(&work.coil).zip(map.as_slice()) {
                *o += s.conj() * v;
            }
        }
    }

    /// ∇ log p(y|x) = −(1/σ_η²)(AᴴA x − Aᴴ y) under p(y|x) = CN(Ax, σ_η² I).
    pub fn likelihood_gradient(&self, x: &ComplexImage, y: &KSpaceData, sigma_eta_sq: f64) -> Result<ComplexImage> {
        if !(sigma_eta_sq > 0.0 && sigma_eta_sq.is_finite()) {
            return Err(Error::NonPositiveVariance(sigma_eta_sq));
        }
        let aha = self.normal(x)?;
        let ahy = self.adjoint(y)?;
        aha.zip_map(&ahy, |a, b| (b - a) / sigma_eta_sq)
    }

    /// log p(y|x) up to an additive constant: −‖y − Ax‖²/σ_η².
    pub fn log_likelihood(&self, x: &ComplexImage, y: &KSpaceData, sigma_eta_sq: f64) -> Result<f64> {
        if !(sigma_eta_sq > 0.0) {
            return Err(Error::NonPositiveVariance(sigma_eta_sq));
        }
        self.check_kspace(y)?;
        let ax = self.apply(x)?;
        let r: f64 = ax.samples().iter().zip(y.samples()).map(|(a, b)| (b - a).norm_sqr()).sum();
        Ok(-r / sigma_eta_sq)
    }

    /// y = A x + η with η ~ CN(0, noise_sd² I).
    pub fn simulate_measurement(&self, x: &ComplexImage, noise_sd: f64, seed: u64) -> Result<KSpaceData> {
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(Error::invalid(format!("noise_sd must be nonnegative, got {noise_sd}")));
        }
        let mut y = self.apply(x)?;
        if noise_sd > 0.0 {
            let mut rng = stream_rng(seed, streams::MEASUREMENT);
            for v in y.samples_mut() {
                *v += standard_complex_normal(&mut rng) * noise_sd;
            }
        }
        Ok(y)
    }

    /// Zero-filled k-space container on this operator's layout.
    pub fn kspace_from_samples(&self, samples: Vec<Complex64>) -> Result<KSpaceData> {
        let (h, w) = self.image_shape();
        KSpaceData::new(h, w, self.coils.coils(), self.locations.clone(), samples)
    }

    /// Dense matrix of A (rows = measurements, columns = pixels), row-major.
    /// Only sensible for small images.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let (h, w) = self.image_shape();
        let n = h * w;
        let m = self.measurement_len();
        let mut cols = Vec::with_capacity(n);
        let mut work = OperatorWork::default();
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        let mut out = vec![Complex64::new(0.0, 0.0); m];
        for p in 0..n {
            e[p] = Complex64::new(1.0, 0.0);
            self.apply_into(&e, &mut out, &mut work);
            cols.push(out.clone());
            e[p] = Complex64::new(0.0, 0.0);
        }
        (0..m).map(|r| (0..n).map(|p| cols[p][r]).collect()).collect()
    }
}
