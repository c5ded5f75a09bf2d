//! Annealed Langevin sampling of the posterior over the reverse diffusion,
//! with optional burn-in chain splitting, a noise-free MAP mode and extended
//! refinement at the final scale.
//!
//! A step that targets scale i uses τ_{i+1} and σ_{i+1}:
//!
//! x ← x + (σ_{i+1}² − σ_i²)·s(x, i) + (τ_{i+1}²/σ_η²)·(Aᴴy − AᴴA x) + √(2τ_{i+1}²)·z
//!
//! with z ~ CN(0, I), or z = 0 in deterministic mode.

mod diffusion;
mod trace;

pub use diffusion::{perturb_oneshot, perturb_stepwise};
pub use trace::{write_trace_csv, TraceRecord, TRACE_HEADER};

use num_complex::Complex64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::domain::rng::{standard_complex_normal, stream_rng, streams, ChainRng};
use crate::domain::{ComplexImage, KSpaceData, NoiseSchedule, SamplerConfig};
use crate::error::{Error, Result};
use crate::estimators::{psnr, ssim, RangePolicy, SampleSet, SSIM_WINDOW};
use crate::forward::{ForwardOperator, OperatorWork};
use crate::prior::ScorePrior;

/// Coefficients of one Langevin step at a given target scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoefficients {
    /// σ_{i+1}² − σ_i².
    pub prior: f64,
    /// τ_{i+1}²/σ_η².
    pub data: f64,
    /// √(2τ_{i+1}²).
    pub noise_sd: f64,
}

/// One Markov chain. `index` is the scale the current sample belongs to and
/// `step` counts the steps taken at that scale; extended iterations keep
/// `index = 1` and continue the count past K.
#[derive(Debug, Clone)]
pub struct ChainState {
    /// `None` for the shared burn-in chain.
    pub chain: Option<usize>,
    pub x: ComplexImage,
    pub index: usize,
    pub step: usize,
    pub total_steps: usize,
    pub stream: u64,
    rng: ChainRng,
    pub trace: Vec<TraceRecord>,
}

impl ChainState {
    /// Fresh chain at scale `index` with x ~ CN(0, I) drawn from its own stream.
    pub fn initial(chain: Option<usize>, shape: (usize, usize), index: usize, seed: u64, stream: u64) -> Self {
        let mut rng = stream_rng(seed, stream);
        let x = ComplexImage::from_fn(shape.0, shape.1, |_, _| standard_complex_normal(&mut rng));
        ChainState { chain, x, index, step: 0, total_steps: 0, stream, rng, trace: Vec::new() }
    }

    /// Copy of the current sample continuing on a new stream with an empty trace.
    pub fn fork(&self, chain: usize, seed: u64, stream: u64) -> Self {
        ChainState {
            chain: Some(chain),
            x: self.x.clone(),
            index: self.index,
            step: self.step,
            total_steps: self.total_steps,
            stream,
            rng: stream_rng(seed, stream),
            trace: Vec::new(),
        }
    }
}

/// Final samples of a run plus the recorded traces of every chain.
#[derive(Debug, Clone)]
pub struct SamplerOutput {
    pub samples: SampleSet,
    pub trace: Vec<TraceRecord>,
}

/// Result of the noise-free MAP path.
#[derive(Debug, Clone)]
pub struct MapOutput {
    pub x: ComplexImage,
    /// ‖Δx‖ of every step, scale loop first, then the extended iterations.
    pub step_norms: Vec<f64>,
}

struct StepWork {
    score: Vec<Complex64>,
    normal: Vec<Complex64>,
    op: OperatorWork,
}

/// Everything shared read-only by the chains of one run.
pub struct PosteriorRun<'a> {
    config: SamplerConfig,
    schedule: &'a NoiseSchedule,
    prior: &'a dyn ScorePrior,
    operator: &'a ForwardOperator,
    aty: ComplexImage,
    coefficients: Vec<StepCoefficients>,
    reference: Option<ComplexImage>,
}

impl<'a> PosteriorRun<'a> {
    pub fn new(
        config: SamplerConfig,
        schedule: &'a NoiseSchedule,
        prior: &'a dyn ScorePrior,
        operator: &'a ForwardOperator,
        y: &KSpaceData,
    ) -> Result<Self> {
        config.validate(schedule)?;
        if schedule.len() < 2 {
            return Err(Error::invalid("sampling needs at least two noise scales"));
        }
        let aty = operator.adjoint(y)?;
        let coefficients = (1..schedule.len())
            .map(|i| {
                let tau_sq = schedule.tau_sq(i + 1)?;
                let sigma_eta_sq = config.likelihood.variance(schedule, i, config.lambda)?;
                Ok(StepCoefficients {
                    prior: schedule.step_variance(i + 1)?,
                    data: tau_sq / sigma_eta_sq,
                    noise_sd: (2.0 * tau_sq).sqrt(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PosteriorRun { config, schedule, prior, operator, aty, coefficients, reference: None })
    }

    /// Ground truth used for PSNR/SSIM in trace records.
    pub fn with_reference(mut self, reference: ComplexImage) -> Result<Self> {
        self.operator.check_image(&reference)?;
        self.reference = Some(reference);
        Ok(self)
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        self.schedule
    }

    pub fn image_shape(&self) -> (usize, usize) {
        self.operator.image_shape()
    }

    /// Step coefficients at target scale `i` (1 ≤ i < N).
    pub fn coefficients(&self, i: usize) -> Result<StepCoefficients> {
        if i == 0 || i > self.coefficients.len() {
            return Err(Error::IndexOutOfRange { index: i, max: self.coefficients.len() });
        }
        Ok(self.coefficients[i - 1])
    }

    fn work(&self) -> StepWork {
        let n = self.aty.len();
        StepWork {
            score: vec![Complex64::new(0.0, 0.0); n],
            normal: vec![Complex64::new(0.0, 0.0); n],
            op: OperatorWork::default(),
        }
    }

    /// One Langevin step at target scale `target`; returns ‖Δx‖.
    pub fn langevin_step(&self, state: &mut ChainState, target: usize) -> Result<f64> {
        let mut work = self.work();
        self.step_with(state, target, &mut work)
    }

    fn step_with(&self, state: &mut ChainState, target: usize, work: &mut StepWork) -> Result<f64> {
        let c = self.coefficients(target)?;
        self.operator.check_image(&state.x)?;
        self.prior.score_into(&state.x, target, self.schedule, &mut work.score)?;
        self.operator.normal_into(state.x.as_slice(), &mut work.normal, &mut work.op);
        let deterministic = self.config.deterministic;
        let mut delta_sq = 0.0;
        let mut norm_sq = 0.0;
        for (((x, s), n), b) in state.x.as_mut_slice().iter_mut().zip(&work.score).zip(&work.normal).zip(self.aty.as_slice()) {
            let mut d = s * c.prior + (b - n) * c.data;
            if !deterministic {
                d += standard_complex_normal(&mut state.rng) * c.noise_sd;
            }
            *x += d;
            delta_sq += d.norm_sqr();
            norm_sq += x.norm_sqr();
        }
        state.index = target;
        state.step += 1;
        state.total_steps += 1;
        if !norm_sq.is_finite() || !delta_sq.is_finite() {
            return Err(Error::NonFinite { scale: target, step: state.step });
        }
        let norm = norm_sq.sqrt();
        if norm > self.config.divergence_limit {
            return Err(Error::Divergence { scale: target, step: state.step, norm });
        }
        let update = delta_sq.sqrt();
        let every = self.config.trace_every;
        if every > 0 && state.total_steps % every == 0 {
            state.trace.push(self.record(state, update));
        }
        Ok(update)
    }

    fn record(&self, state: &ChainState, update_norm: f64) -> TraceRecord {
        let (psnr_db, ssim_val) = match &self.reference {
            Some(r) => {
                let (h, w) = r.shape();
                let s = if h >= SSIM_WINDOW && w >= SSIM_WINDOW {
                    ssim(&state.x, r, RangePolicy::PerSliceMax).ok()
                } else {
                    None
                };
                (psnr(&state.x, r, RangePolicy::PerSliceMax).ok(), s)
            }
            None => (None, None),
        };
        TraceRecord {
            chain: state.chain,
            scale: state.index,
            step: state.step,
            update_norm,
            psnr: psnr_db,
            ssim: ssim_val,
        }
    }

    /// Runs K steps at each target scale from `state.index − 1` down to `last`.
    fn descend(&self, state: &mut ChainState, last: usize, work: &mut StepWork, mut on_step: impl FnMut(f64)) -> Result<()> {
        while state.index > last {
            let target = state.index - 1;
            state.index = target;
            state.step = 0;
            for _ in 0..self.config.steps_per_scale {
                on_step(self.step_with(state, target, work)?);
            }
        }
        Ok(())
    }

    fn extend(&self, state: &mut ChainState, iters: usize, work: &mut StepWork, mut on_step: impl FnMut(f64)) -> Result<()> {
        for _ in 0..iters {
            on_step(self.step_with(state, 1, work)?);
        }
        Ok(())
    }

    /// Runs each state down to scale 1 and through the extended iterations.
    pub fn run_chains_from(&self, states: Vec<ChainState>) -> Result<Vec<ChainState>> {
        let job = |mut s: ChainState| -> Result<ChainState> {
            let mut work = self.work();
            self.descend(&mut s, 1, &mut work, |_| {})?;
            self.extend(&mut s, self.config.extended_iters, &mut work, |_| {})?;
            Ok(s)
        };
        if self.config.threads == 1 || states.len() < 2 {
            return states.into_iter().map(job).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.threads)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start worker threads: {e}")))?;
        pool.install(|| states.into_par_iter().map(job).collect())
    }

    fn finish(&self, chains: Vec<ChainState>, mut trace: Vec<TraceRecord>) -> Result<SamplerOutput> {
        let mut samples = Vec::with_capacity(chains.len());
        for c in chains {
            trace.extend(c.trace);
            samples.push(c.x);
        }
        let samples = SampleSet::new(samples)?.with_metadata(self.config.seed, config_fingerprint(&self.config, self.schedule));
        Ok(SamplerOutput { samples, trace })
    }
}

/// Runs the configured sampler: independent chains, or a burn-in chain
/// forked at `config.split_index` when that is nonzero.
pub fn run_posterior_sampling(run: &PosteriorRun) -> Result<SamplerOutput> {
    if run.config.split_index > 0 {
        return run_with_burn_in(run, run.config.split_index);
    }
    let cfg = &run.config;
    let states = (0..cfg.n_chains)
        .map(|c| ChainState::initial(Some(c), run.image_shape(), cfg.start_index, cfg.seed, c as u64))
        .collect();
    let chains = run.run_chains_from(states)?;
    run.finish(chains, Vec::new())
}

/// One chain covers the target scales above `split_index`; its state is then
/// copied into `n_chains` chains on fresh streams that run to the end.
pub fn run_with_burn_in(run: &PosteriorRun, split_index: usize) -> Result<SamplerOutput> {
    let cfg = &run.config;
    if split_index >= cfg.start_index {
        return Err(Error::invalid(format!(
            "split_index ({split_index}) must lie below start_index ({})",
            cfg.start_index
        )));
    }
    let mut burn = ChainState::initial(None, run.image_shape(), cfg.start_index, cfg.seed, streams::BURN_IN);
    let mut work = run.work();
    run.descend(&mut burn, split_index + 1, &mut work, |_| {})?;
    let states = (0..cfg.n_chains)
        .map(|c| burn.fork(c, cfg.seed, streams::SPLIT + c as u64))
        .collect();
    let chains = run.run_chains_from(states)?;
    run.finish(chains, burn.trace)
}

/// Noise-free run of chain 0 followed by `extended_iters` steps at the final scale.
pub fn run_map(run: &PosteriorRun, extended_iters: usize) -> Result<MapOutput> {
    if !run.config.deterministic {
        return Err(Error::invalid("MAP estimation needs a deterministic sampler config"));
    }
    let cfg = &run.config;
    let mut state = ChainState::initial(Some(0), run.image_shape(), cfg.start_index, cfg.seed, 0);
    let mut work = run.work();
    let mut step_norms = Vec::new();
    run.descend(&mut state, 1, &mut work, |n| step_norms.push(n))?;
    run.extend(&mut state, extended_iters, &mut work, |n| step_norms.push(n))?;
    Ok(MapOutput { x: state.x, step_norms })
}

/// Stable fingerprint of a sampler config and its schedule.
pub fn config_fingerprint(config: &SamplerConfig, schedule: &NoiseSchedule) -> u64 {
    let mut h = Sha256::new();
    h.update(toml::to_string(config).expect("sampler config serializes").as_bytes());
    h.update(schedule.hash().to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}
