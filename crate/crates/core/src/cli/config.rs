//! Experiment configuration: TOML with one level of sections and scalar values only.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::phantom::{PhantomKind, MIN_PHANTOM_SIZE};
use crate::domain::{LikelihoodWeight, NoiseSchedule, SamplerConfig};
use crate::error::{Error, Result};
use crate::forward::MaskSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Scalar complex posterior under a three-cluster mixture prior.
    ToyGmm,
    /// Single-coil undersampled reconstruction.
    Unfolding,
    Multicoil,
    /// Independent chains against a burn-in chain forked at `split_index`.
    BurnIn,
    /// Noise-free MAP path alongside the stochastic sampler.
    Map,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::ToyGmm => "toy-gmm",
            ExperimentKind::Unfolding => "unfolding",
            ExperimentKind::Multicoil => "multicoil",
            ExperimentKind::BurnIn => "burn-in",
            ExperimentKind::Map => "map",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    pub output_dir: PathBuf,
    /// Percentile of the CI half-widths above which the overlay lights up.
    #[serde(default = "default_ci_percentile")]
    pub ci_percentile: f64,
}

fn default_ci_percentile() -> f64 {
    90.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImageSource {
    #[default]
    Phantom,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageSection {
    pub source: ImageSource,
    pub phantom: PhantomKind,
    pub size: usize,
    /// Complex 2-D array file, used when `source = "file"`.
    pub path: Option<PathBuf>,
    /// Standard deviation of the complex measurement noise.
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for ImageSection {
    fn default() -> Self {
        ImageSection { source: ImageSource::Phantom, phantom: PhantomKind::Ellipses, size: 32, path: None, noise_sd: 0.01, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskKind {
    Full,
    SkipOddEven,
    UniformRandom,
    #[default]
    VariableDensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskSection {
    pub kind: MaskKind,
    pub fraction: f64,
    pub center: usize,
    pub exponent: f64,
    pub min_distance: f64,
    pub probability: f64,
    pub seed: u64,
}

impl Default for MaskSection {
    fn default() -> Self {
        MaskSection { kind: MaskKind::VariableDensity, fraction: 0.3, center: 6, exponent: 2.0, min_distance: 1.0, probability: 0.5, seed: 0 }
    }
}

impl MaskSection {
    pub fn spec(&self) -> MaskSpec {
        match self.kind {
            MaskKind::Full => MaskSpec::Full,
            MaskKind::SkipOddEven => MaskSpec::SkipOddEven,
            MaskKind::UniformRandom => MaskSpec::UniformRandom { probability: self.probability, seed: self.seed },
            MaskKind::VariableDensity => MaskSpec::VariableDensity {
                fraction: self.fraction,
                center: self.center,
                exponent: self.exponent,
                min_distance: self.min_distance,
                seed: self.seed,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoilSection {
    /// 1 means a single unit-sensitivity coil.
    pub count: usize,
}

impl Default for CoilSection {
    fn default() -> Self {
        CoilSection { count: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub scales: usize,
}

impl ScheduleSection {
    pub fn build(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::geometric(self.sigma_min, self.sigma_max, self.scales)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LikelihoodKind {
    #[default]
    TauOverLambda,
    TauSqOverLambda,
    Matched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub steps_per_scale: usize,
    /// Defaults to the top of the schedule.
    pub start_index: Option<usize>,
    pub lambda: f64,
    pub chains: usize,
    pub split_index: usize,
    pub deterministic: bool,
    pub seed: u64,
    pub extended_iters: usize,
    pub likelihood: LikelihoodKind,
    /// Noise variance for the matched likelihood; defaults to the measurement noise.
    pub noise_var: Option<f64>,
    pub divergence_limit: f64,
    pub trace_every: usize,
    pub threads: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::default();
        SamplerSection {
            steps_per_scale: d.steps_per_scale,
            start_index: None,
            lambda: d.lambda,
            chains: 8,
            split_index: 0,
            deterministic: false,
            seed: 0,
            extended_iters: 0,
            likelihood: LikelihoodKind::TauOverLambda,
            noise_var: None,
            divergence_limit: d.divergence_limit,
            trace_every: 0,
            threads: 1,
        }
    }
}

impl SamplerSection {
    /// Sampler parameters; `default_noise_var` feeds the matched likelihood.
    pub fn build(&self, schedule: &NoiseSchedule, default_noise_var: f64) -> Result<SamplerConfig> {
        let likelihood = match self.likelihood {
            LikelihoodKind::TauOverLambda => LikelihoodWeight::TauOverLambda,
            LikelihoodKind::TauSqOverLambda => LikelihoodWeight::TauSqOverLambda,
            LikelihoodKind::Matched => {
                LikelihoodWeight::Matched { noise_var: self.noise_var.unwrap_or(default_noise_var) }
            }
        };
        let config = SamplerConfig {
            steps_per_scale: self.steps_per_scale,
            start_index: self.start_index.unwrap_or(schedule.len()),
            lambda: self.lambda,
            n_chains: self.chains,
            split_index: self.split_index,
            deterministic: self.deterministic,
            seed: self.seed,
            extended_iters: self.extended_iters,
            likelihood,
            divergence_limit: self.divergence_limit,
            trace_every: self.trace_every,
            threads: self.threads,
        };
        config.validate(schedule).map_err(|e| Error::Config(format!("[sampler] {e}")))?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorKind {
    /// Zero-mean diagonal Gaussian, wide on the object support.
    #[default]
    Gaussian,
    Gmm,
    Checkpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    pub kind: PriorKind,
    /// Complex variance on the support.
    pub variance: f64,
    /// Complex variance off the support.
    pub background_variance: f64,
    /// Magnitude above which a ground-truth pixel counts as support.
    pub support_threshold: f64,
    /// Mixture TOML or network checkpoint. The toy experiment has a built-in mixture.
    pub path: Option<PathBuf>,
}

impl Default for PriorSection {
    fn default() -> Self {
        PriorSection { kind: PriorKind::Gaussian, variance: 0.25, background_variance: 1e-4, support_threshold: 0.02, path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToySection {
    pub y_re: f64,
    pub y_im: f64,
    pub noise_var: f64,
    /// Oracle grid covers [−w, w]² with `grid_cells`² cells.
    pub grid_half_width: f64,
    pub grid_cells: usize,
}

impl Default for ToySection {
    fn default() -> Self {
        ToySection { y_re: -1.0, y_im: 2.0, noise_var: 9.0, grid_half_width: 5.0, grid_cells: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub image: ImageSection,
    #[serde(default)]
    pub mask: MaskSection,
    #[serde(default)]
    pub coils: CoilSection,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub prior: PriorSection,
    #[serde(default)]
    pub toy: ToySection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    fn check(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(0.0..=100.0).contains(&self.experiment.ci_percentile) {
            return fail(format!("ci_percentile must lie in [0, 100], got {}", self.experiment.ci_percentile));
        }
        let schedule = self.schedule.build().map_err(|e| Error::Config(format!("[schedule] {e}")))?;
        self.sampler.build(&schedule, 1.0)?;
        if self.sampler.chains < 2 {
            return fail("at least two chains are needed for a variance map".into());
        }
        match self.experiment.kind {
            ExperimentKind::ToyGmm => {
                if self.prior.kind != PriorKind::Gmm {
                    return fail("toy-gmm needs prior.kind = \"gmm\"".into());
                }
                let t = &self.toy;
                if !(t.noise_var > 0.0 && t.grid_half_width > 0.0 && t.grid_cells > 0) {
                    return fail("[toy] noise_var, grid_half_width and grid_cells must be positive".into());
                }
            }
            kind => {
                if self.image.source == ImageSource::Phantom && self.image.size < MIN_PHANTOM_SIZE {
                    return fail(format!("image.size must be at least {MIN_PHANTOM_SIZE}"));
                }
                if self.image.source == ImageSource::File && self.image.path.is_none() {
                    return fail("image.source = \"file\" needs image.path".into());
                }
                if !(self.image.noise_sd > 0.0 && self.image.noise_sd.is_finite()) {
                    return fail("image.noise_sd must be positive".into());
                }
                if self.coils.count == 0 {
                    return fail("coils.count must be at least 1".into());
                }
                if kind == ExperimentKind::Unfolding && self.coils.count != 1 {
                    return fail("unfolding is single-coil; use multicoil for coils.count > 1".into());
                }
                if kind == ExperimentKind::Multicoil && self.coils.count < 2 {
                    return fail("multicoil needs coils.count >= 2".into());
                }
                if kind == ExperimentKind::BurnIn && self.sampler.split_index == 0 {
                    return fail("burn-in needs sampler.split_index > 0".into());
                }
                if self.prior.kind == PriorKind::Gaussian {
                    let p = &self.prior;
                    if !(p.variance > 0.0 && p.background_variance > 0.0 && p.support_threshold >= 0.0) {
                        return fail("[prior] variances must be positive and support_threshold nonnegative".into());
                    }
                }
            }
        }
        if self.prior.kind != PriorKind::Gaussian
            && self.prior.path.is_none()
            && !(self.prior.kind == PriorKind::Gmm && self.experiment.kind == ExperimentKind::ToyGmm)
        {
            return fail(format!("prior.kind = \"{:?}\" needs prior.path", self.prior.kind).to_lowercase());
        }
        Ok(())
    }

    /// Makes relative file references absolute against `base` and checks they exist.
    pub fn resolve_paths(&mut self, base: &Path) -> Result<()> {
        let fix = |p: &mut Option<PathBuf>, what: &str| -> Result<()> {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
                if !path.exists() {
                    return Err(Error::Config(format!("{what} {} does not exist", path.display())));
                }
            }
            Ok(())
        };
        if self.image.source == ImageSource::File {
            fix(&mut self.image.path, "image.path")?;
        }
        if self.prior.kind != PriorKind::Gaussian {
            fix(&mut self.prior.path, "prior.path")?;
        }
        if self.experiment.output_dir.is_relative() {
            self.experiment.output_dir = base.join(&self.experiment.output_dir);
        }
        Ok(())
    }
}
