//! C ABI for diffpost.
//!
//! Conventions:
//! - Every fallible function returns a [`DpStatus`]; results go through out-pointers.
//! - Complex arrays are interleaved `double` pairs (re, im), row-major.
//! - Objects are opaque handles created by `dp_*_new`/`dp_*_load` and released
//!   with the matching `dp_*_free` (which accepts NULL).
//! - On failure, `dp_last_error_message` describes the most recent error on
//!   the calling thread.
//!
//! # Safety
//!
//! All pointer arguments must be NULL or valid for the documented number of
//! elements; handles must come from this library and not be used after free.
//! Every exported `unsafe` function shares this contract.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use diffpost::domain::{ComplexImage, LikelihoodWeight, NoiseSchedule, SamplerConfig};
use diffpost::estimators::{mmse, psnr, ssim, variance_map, RangePolicy, SampleSet};
use diffpost::forward::{CoilMaps, ForwardOperator, MaskSpec, SamplingMask};
use diffpost::prior::{GaussianPrior, GmmPrior, ScorePrior};
use diffpost::sampler::{run_map, run_posterior_sampling, PosteriorRun};
use diffpost::score_training::load_checkpoint;
use diffpost::Error;
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    Diverged = 4,
    Io = 5,
    Format = 6,
    Config = 7,
    Panic = 8,
    Other = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpLikelihood {
    TauOverLambda = 0,
    TauSqOverLambda = 1,
    Matched = 2,
}

/// Sampler parameters; start from `dp_sampler_config_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DpSamplerConfig {
    pub steps_per_scale: usize,
    pub start_index: usize,
    pub lambda: f64,
    pub n_chains: usize,
    pub split_index: usize,
    pub deterministic: bool,
    pub seed: u64,
    pub extended_iters: usize,
    pub likelihood: DpLikelihood,
    /// Only read for `Matched`.
    pub noise_var: f64,
    pub divergence_limit: f64,
    /// 1 = sequential, 0 = one thread per core.
    pub threads: usize,
}

pub struct DpSchedule(NoiseSchedule);
pub struct DpOperator(ForwardOperator);
pub struct DpPrior(Box<dyn ScorePrior>);
pub struct DpSamples(SampleSet);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> DpStatus {
    match err {
        Error::InvalidArgument(_) | Error::IndexOutOfRange { .. } | Error::NonPositiveVariance(_) | Error::Singular(_) => {
            DpStatus::InvalidArgument
        }
        Error::ShapeMismatch { .. } => DpStatus::ShapeMismatch,
        Error::Divergence { .. } | Error::NonFinite { .. } | Error::TrainingDiverged { .. } => DpStatus::Diverged,
        Error::Io(_) => DpStatus::Io,
        Error::Format(_) => DpStatus::Format,
        Error::Config(_) => DpStatus::Config,
        _ => DpStatus::Other,
    }
}

struct Fail(DpStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

type FfiResult<T> = Result<T, Fail>;

fn null(what: &str) -> Fail {
    Fail(DpStatus::NullPointer, format!("{what} is NULL"))
}

/// Runs `f`, converting errors and panics into a status plus the thread's last error.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> DpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DpStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DpStatus::Panic
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> FfiResult<&'a mut [T]> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn path<'a>(p: *const c_char) -> FfiResult<&'a Path> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(DpStatus::InvalidArgument, "path is not valid UTF-8".into()))?;
    Ok(Path::new(s))
}

fn pixel_count(height: usize, width: usize) -> FfiResult<usize> {
    height
        .checked_mul(width)
        .filter(|&n| n > 0)
        .ok_or_else(|| Fail(DpStatus::InvalidArgument, format!("invalid image size {height}x{width}")))
}

unsafe fn read_complex(p: *const f64, count: usize, what: &str) -> FfiResult<Vec<Complex64>> {
    let raw = slice(p, 2 * count, what)?;
    Ok(raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect())
}

unsafe fn read_image(p: *const f64, height: usize, width: usize, what: &str) -> FfiResult<ComplexImage> {
    let n = pixel_count(height, width)?;
    Ok(ComplexImage::from_vec(height, width, read_complex(p, n, what)?)?)
}

unsafe fn write_complex(values: &[Complex64], out: *mut f64) -> FfiResult<()> {
    let dst = slice_mut(out, 2 * values.len(), "output buffer")?;
    for (d, v) in dst.chunks_exact_mut(2).zip(values) {
        d[0] = v.re;
        d[1] = v.im;
    }
    Ok(())
}

fn boxed<T>(value: T, out: &mut *mut T) {
    *out = Box::into_raw(Box::new(value));
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL,
/// or 0 when no error has been recorded.
#[no_mangle]
pub unsafe extern "C" fn dp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

#[no_mangle]
pub extern "C" fn dp_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

// ---- schedule ----

#[no_mangle]
pub unsafe extern "C" fn dp_schedule_geometric(sigma_min: f64, sigma_max: f64, n: usize, out: *mut *mut DpSchedule) -> DpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        boxed(DpSchedule(NoiseSchedule::geometric(sigma_min, sigma_max, n)?), out);
        Ok(())
    })
}

/// Schedule from explicit σ_1 < … < σ_N.
#[no_mangle]
pub unsafe extern "C" fn dp_schedule_from_sigmas(sigmas: *const f64, n: usize, out: *mut *mut DpSchedule) -> DpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let s = slice(sigmas, n, "sigmas")?.to_vec();
        boxed(DpSchedule(NoiseSchedule::from_sigmas(s)?), out);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn dp_schedule_len(schedule: *const DpSchedule, out: *mut usize) -> DpStatus {
    guard(|| {
        *out_ptr(out, "out")? = handle(schedule, "schedule")?.0.len();
        Ok(())
    })
}

/// σ_i for 0 ≤ i ≤ N (σ_0 = 0).
#[no_mangle]
pub unsafe extern "C" fn dp_schedule_sigma(schedule: *const DpSchedule, i: usize, out: *mut f64) -> DpStatus {
    guard(|| {
        let s = handle(schedule, "schedule")?;
        *out_ptr(out, "out")? = s.0.sigma(i)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn dp_schedule_free(schedule: *mut DpSchedule) {
    free(schedule)
}

// ---- masks and operators ----

/// Fills `grid` (height·width bytes, 1 = acquired) with a variable-density mask.
#[no_mangle]
pub unsafe extern "C" fn dp_mask_variable_density(
    height: usize,
    width: usize,
    fraction: f64,
    center: usize,
    exponent: f64,
    min_distance: f64,
    seed: u64,
    grid: *mut u8,
) -> DpStatus {
    guard(|| {
        let n = pixel_count(height, width)?;
        let dst = slice_mut(grid, n, "grid")?;
        let spec = MaskSpec::VariableDensity { fraction, center, exponent, min_distance, seed };
        let mask = SamplingMask::make(height, width, &spec)?;
        for (d, &b) in dst.iter_mut().zip(mask.grid()) {
            *d = b as u8;
        }
        Ok(())
    })
}

/// Operator P·F·S for a k-space `mask` (height·width bytes, nonzero = acquired)
/// and `coils` synthetic coil maps (1 = single unit coil).
#[no_mangle]
pub unsafe extern "C" fn dp_operator_new(
    height: usize,
    width: usize,
    mask: *const u8,
    coils: usize,
    out: *mut *mut DpOperator,
) -> DpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let n = pixel_count(height, width)?;
        let grid = slice(mask, n, "mask")?.iter().map(|&b| b != 0).collect();
        let mask = SamplingMask::from_grid(height, width, grid)?;
        let maps = match coils {
            0 => return Err(Fail(DpStatus::InvalidArgument, "coil count must be positive".into())),
            1 => CoilMaps::unit(height, width),
            c => CoilMaps::synthetic(height, width, c)?,
        };
        boxed(DpOperator(ForwardOperator::new(mask, maps)?), out);
        Ok(())
    })
}

/// Number of complex measurements produced by the operator.
#[no_mangle]
pub unsafe extern "C" fn dp_operator_measurement_len(op: *const DpOperator, out: *mut usize) -> DpStatus {
    guard(|| {
        *out_ptr(out, "out")? = handle(op, "operator")?.0.measurement_len();
        Ok(())
    })
}

/// y = A x. `x` holds height·width complex values, `y` measurement_len.
#[no_mangle]
pub unsafe extern "C" fn dp_operator_apply(op: *const DpOperator, x: *const f64, y: *mut f64) -> DpStatus {
    guard(|| {
        let op = &handle(op, "operator")?.0;
        let (h, w) = op.image_shape();
        let img = read_image(x, h, w, "x")?;
        write_complex(op.apply(&img)?.samples(), y)
    })
}

/// x = Aᴴ y.
#[no_mangle]
pub unsafe extern "C" fn dp_operator_adjoint(op: *const DpOperator, y: *const f64, x: *mut f64) -> DpStatus {
    guard(|| {
        let op = &handle(op, "operator")?.0;
        let y = op.kspace_from_samples(read_complex(y, op.measurement_len(), "y")?)?;
        write_complex(op.adjoint(&y)?.as_slice(), x)
    })
}

/// y = A x + η with η ~ CN(0, noise_sd²), reproducible in `seed`.
#[no_mangle]
pub unsafe extern "C" fn dp_operator_simulate(op: *const DpOperator, x: *const f64, noise_sd: f64, seed: u64, y: *mut f64) -> DpStatus {
    guard(|| {
        let op = &handle(op, "operator")?.0;
        let (h, w) = op.image_shape();
        let img = read_image(x, h, w, "x")?;
        write_complex(op.simulate_measurement(&img, noise_sd, seed)?.samples(), y)
    })
}

#[no_mangle]
pub unsafe extern "C" fn dp_operator_free(op: *mut DpOperator) {
    free(op)
}

// ---- priors ----

/// Independent CN(mean_p, variance_p) per pixel.
#[no_mangle]
pub unsafe extern "C" fn dp_prior_gaussian(
    height: usize,
    width: usize,
    mean: *const f64,
    variance: *const f64,
    out: *mut *mut DpPrior,
) -> DpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let m = read_image(mean, height, width, "mean")?;
        let v = slice(variance, height * width, "variance")?.to_vec();
        boxed(DpPrior(Box::new(GaussianPrior::diagonal(m, v)?)), out);
        Ok(())
    })
}

/// Gaussian mixture from its TOML file.
#[no_mangle]
pub unsafe extern "C" fn dp_prior_gmm_load(file: *const c_char, out: *mut *mut DpPrior) -> DpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        boxed(DpPrior(Box::new(GmmPrior::load(path(file)?)?)), out);
        Ok(())
    })
}

/// Trained score network; `schedule` must be the one it was trained on.
#[no_mangle]
pub unsafe extern "C" fn dp_prior_checkpoint_load(file: *const c_char, schedule: *const DpSchedule, out: *mut *mut DpPrior) -> DpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let s = handle(schedule, "schedule")?;
        boxed(DpPrior(Box::new(load_checkpoint(path(file)?, &s.0)?)), out);
        Ok(())
    })
}

/// s(x, index) into `out` (height·width complex values).
#[no_mangle]
pub unsafe extern "C" fn dp_prior_score(
    prior: *const DpPrior,
    schedule: *const DpSchedule,
    height: usize,
    width: usize,
    x: *const f64,
    index: usize,
    out: *mut f64,
) -> DpStatus {
    guard(|| {
        let p = handle(prior, "prior")?;
        let s = handle(schedule, "schedule")?;
        let img = read_image(x, height, width, "x")?;
        write_complex(p.0.score(&img, index, &s.0)?.as_slice(), out)
    })
}

#[no_mangle]
pub unsafe extern "C" fn dp_prior_free(prior: *mut DpPrior) {
    free(prior)
}

// ---- sampling ----

#[no_mangle]
pub extern "C" fn dp_sampler_config_default() -> DpSamplerConfig {
    let d = SamplerConfig::default();
    DpSamplerConfig {
        steps_per_scale: d.steps_per_scale,
        start_index: d.start_index,
        lambda: d.lambda,
        n_chains: d.n_chains,
        split_index: d.split_index,
        deterministic: d.deterministic,
        seed: d.seed,
        extended_iters: d.extended_iters,
        likelihood: DpLikelihood::TauOverLambda,
        noise_var: 1.0,
        divergence_limit: d.divergence_limit,
        threads: d.threads,
    }
}

fn sampler_config(c: &DpSamplerConfig) -> SamplerConfig {
    let likelihood = match c.likelihood {
        DpLikelihood::TauOverLambda => LikelihoodWeight::TauOverLambda,
        DpLikelihood::TauSqOverLambda => LikelihoodWeight::TauSqOverLambda,
        DpLikelihood::Matched => LikelihoodWeight::Matched { noise_var: c.noise_var },
    };
    SamplerConfig {
        steps_per_scale: c.steps_per_scale,
        start_index: c.start_index,
        lambda: c.lambda,
        n_chains: c.n_chains,
        split_index: c.split_index,
        deterministic: c.deterministic,
        seed: c.seed,
        extended_iters: c.extended_iters,
        likelihood,
        divergence_limit: c.divergence_limit,
        trace_every: 0,
        threads: c.threads,
    }
}

struct Inputs<'a> {
    schedule: &'a NoiseSchedule,
    prior: &'a dyn ScorePrior,
    op: &'a ForwardOperator,
    y: diffpost::domain::KSpaceData,
    config: SamplerConfig,
}

unsafe fn inputs<'a>(
    schedule: *const DpSchedule,
    prior: *const DpPrior,
    op: *const DpOperator,
    y: *const f64,
    config: *const DpSamplerConfig,
) -> FfiResult<Inputs<'a>> {
    let schedule = &handle(schedule, "schedule")?.0;
    let prior = handle(prior, "prior")?.0.as_ref();
    let op = &handle(op, "operator")?.0;
    let config = sampler_config(handle(config, "config")?);
    let y = op.kspace_from_samples(read_complex(y, op.measurement_len(), "y")?)?;
    Ok(Inputs { schedule, prior, op, y, config })
}

/// Annealed Langevin posterior sampling; `y` holds measurement_len complex values.
#[no_mangle]
pub unsafe extern "C" fn dp_sample(
    schedule: *const DpSchedule,
    prior: *const DpPrior,
    op: *const DpOperator,
    y: *const f64,
    config: *const DpSamplerConfig,
    out: *mut *mut DpSamples,
) -> DpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let i = inputs(schedule, prior, op, y, config)?;
        let run = PosteriorRun::new(i.config, i.schedule, i.prior, i.op, &i.y)?;
        boxed(DpSamples(run_posterior_sampling(&run)?.samples), out);
        Ok(())
    })
}

/// Noise-free MAP path; `config.deterministic` must be set. Writes height·width complex values.
#[no_mangle]
pub unsafe extern "C" fn dp_map(
    schedule: *const DpSchedule,
    prior: *const DpPrior,
    op: *const DpOperator,
    y: *const f64,
    config: *const DpSamplerConfig,
    x: *mut f64,
) -> DpStatus {
    guard(|| {
        let i = inputs(schedule, prior, op, y, config)?;
        let ext = i.config.extended_iters;
        let run = PosteriorRun::new(i.config, i.schedule, i.prior, i.op, &i.y)?;
        write_complex(run_map(&run, ext)?.x.as_slice(), x)
    })
}

#[no_mangle]
pub unsafe extern "C" fn dp_samples_count(samples: *const DpSamples, out: *mut usize) -> DpStatus {
    guard(|| {
        *out_ptr(out, "out")? = handle(samples, "samples")?.0.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn dp_samples_shape(samples: *const DpSamples, height: *mut usize, width: *mut usize) -> DpStatus {
    guard(|| {
        let (h, w) = handle(samples, "samples")?.0.shape();
        *out_ptr(height, "height")? = h;
        *out_ptr(width, "width")? = w;
        Ok(())
    })
}

/// Sample `k` as height·width complex values.
#[no_mangle]
pub unsafe extern "C" fn dp_samples_get(samples: *const DpSamples, k: usize, x: *mut f64) -> DpStatus {
    guard(|| {
        let s = &handle(samples, "samples")?.0;
        let img = s
            .samples()
            .get(k)
            .ok_or_else(|| Fail(DpStatus::InvalidArgument, format!("sample {k} out of range 0..{}", s.len())))?;
        write_complex(img.as_slice(), x)
    })
}

/// Sample mean (MMSE estimate) as height·width complex values.
#[no_mangle]
pub unsafe extern "C" fn dp_samples_mmse(samples: *const DpSamples, x: *mut f64) -> DpStatus {
    guard(|| write_complex(mmse(&handle(samples, "samples")?.0).as_slice(), x))
}

/// Per-pixel sample variance of the magnitudes (height·width doubles).
#[no_mangle]
pub unsafe extern "C" fn dp_samples_variance(samples: *const DpSamples, out: *mut f64) -> DpStatus {
    guard(|| {
        let v = variance_map(&handle(samples, "samples")?.0)?.variance;
        slice_mut(out, v.len(), "out")?.copy_from_slice(&v);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn dp_samples_free(samples: *mut DpSamples) {
    free(samples)
}

// ---- metrics ----

/// PSNR in dB of `x` against `reference` (normalized magnitudes, peak of the reference).
#[no_mangle]
pub unsafe extern "C" fn dp_psnr(height: usize, width: usize, x: *const f64, reference: *const f64, out: *mut f64) -> DpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = psnr(&read_image(x, height, width, "x")?, &read_image(reference, height, width, "reference")?, RangePolicy::PerSliceMax)?;
        Ok(())
    })
}

/// SSIM of `x` against `reference` (needs at least 7×7 pixels).
#[no_mangle]
pub unsafe extern "C" fn dp_ssim(height: usize, width: usize, x: *const f64, reference: *const f64, out: *mut f64) -> DpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ssim(&read_image(x, height, width, "x")?, &read_image(reference, height, width, "reference")?, RangePolicy::PerSliceMax)?;
        Ok(())
    })
}
