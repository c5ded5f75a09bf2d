//! Denoising score matching for small noise-conditioned networks.

mod checkpoint;
mod conditioning;
mod net;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use conditioning::{ConditioningMode, NoiseConditioning};
pub use net::{Activation, Architecture, ParamBlock, ScoreNet, MLP_HIDDEN_LAYERS};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::rng::{fill_complex_normal, stream_rng, streams};
use crate::domain::{ComplexImage, NoiseSchedule};
use crate::error::{Error, Result};
use net::to_channels;

/// One perturbation of a training sample: x_i = x_0 + z with z ~ CN(0, σ_i² I).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub index: usize,
    pub noise: Vec<Complex64>,
}

/// σ_{i−1}²/τ_i², the per-scale weight of the objective.
pub fn dsm_weight(schedule: &NoiseSchedule, i: usize) -> Result<f64> {
    if i < 2 {
        return Err(Error::IndexOutOfRange { index: i, max: schedule.len() });
    }
    Ok(schedule.sigma_sq(i - 1)? / schedule.tau_sq(i)?)
}

/// Draws i uniformly from 2..=N and z ~ CN(0, σ_i² I) for each of `count` samples.
pub fn draw_noise<R: Rng + ?Sized>(schedule: &NoiseSchedule, count: usize, dim: usize, rng: &mut R) -> Result<Vec<NoiseDraw>> {
    if schedule.len() < 2 {
        return Err(Error::invalid("score matching needs at least two noise scales"));
    }
    (0..count)
        .map(|_| {
            let index = rng.gen_range(2..=schedule.len());
            let sigma = schedule.sigma(index)?;
            let mut noise = vec![Complex64::new(0.0, 0.0); dim];
            fill_complex_normal(rng, &mut noise);
            noise.iter_mut().for_each(|z| *z *= sigma);
            Ok(NoiseDraw { index, noise })
        })
        .collect()
}

fn check_batch(batch: &[ComplexImage], draws: &[NoiseDraw]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::invalid("batch must be non-empty"));
    }
    if batch.len() != draws.len() {
        return Err(Error::shape(batch.len(), draws.len()));
    }
    for (x, d) in batch.iter().zip(draws) {
        if x.len() != d.noise.len() {
            return Err(Error::shape(x.len(), d.noise.len()));
        }
    }
    Ok(())
}

/// Batch mean of (σ_{i−1}²/τ_i²)·‖−z/σ_i² − s(x_0 + z, i)‖² for an arbitrary score field.
///
/// The regression target −z/σ_i² is ∇ log q(x_i | x_0).
pub fn dsm_objective(
    schedule: &NoiseSchedule,
    batch: &[ComplexImage],
    draws: &[NoiseDraw],
    mut score: impl FnMut(&ComplexImage, usize) -> Result<ComplexImage>,
) -> Result<f64> {
    check_batch(batch, draws)?;
    let mut total = 0.0;
    for (x0, d) in batch.iter().zip(draws) {
        let sigma_sq = schedule.sigma_sq(d.index)?;
        let xi = ComplexImage::from_vec(x0.height(), x0.width(), x0.as_slice().iter().zip(&d.noise).map(|(a, z)| a + z).collect())?;
        let s = score(&xi, d.index)?;
        let resid: f64 = d.noise.iter().zip(s.as_slice()).map(|(z, s)| (-z / sigma_sq - s).norm_sqr()).sum();
        total += dsm_weight(schedule, d.index)? * resid;
    }
    Ok(total / batch.len() as f64)
}

pub fn dsm_loss_fixed(net: &ScoreNet, batch: &[ComplexImage], draws: &[NoiseDraw]) -> Result<f64> {
    dsm_objective(net.schedule(), batch, draws, |x, i| net.evaluate(x, i))
}

/// Loss on fresh draws from `rng`.
pub fn dsm_loss<R: Rng + ?Sized>(net: &ScoreNet, batch: &[ComplexImage], schedule: &NoiseSchedule, rng: &mut R) -> Result<f64> {
    if schedule != net.schedule() {
        return Err(Error::invalid("network was built for a different noise schedule"));
    }
    let dim = batch.first().map_or(0, |x| x.len());
    let draws = draw_noise(schedule, batch.len(), dim, rng)?;
    dsm_loss_fixed(net, batch, &draws)
}

/// Loss and its parameter gradient (overwrites `grad`).
pub fn dsm_loss_and_grad(net: &ScoreNet, batch: &[ComplexImage], draws: &[NoiseDraw], grad: &mut [f64]) -> Result<f64> {
    check_batch(batch, draws)?;
    if grad.len() != net.param_count() {
        return Err(Error::shape(net.param_count(), grad.len()));
    }
    grad.iter_mut().for_each(|g| *g = 0.0);
    let schedule = net.schedule();
    let b = batch.len() as f64;
    let mut total = 0.0;
    for (x0, d) in batch.iter().zip(draws) {
        let sigma_sq = schedule.sigma_sq(d.index)?;
        let weight = dsm_weight(schedule, d.index)?;
        let xi: Vec<Complex64> = x0.as_slice().iter().zip(&d.noise).map(|(a, z)| a + z).collect();
        let target: Vec<f64> = to_channels(&d.noise).iter().map(|z| -z / sigma_sq).collect();
        let mut loss = 0.0;
        net.forward_backward(
            &to_channels(&xi),
            d.index,
            |s| {
                loss = s.iter().zip(&target).map(|(s, t)| (t - s).powi(2)).sum::<f64>();
                s.iter().zip(&target).map(|(s, t)| 2.0 * weight * (s - t) / b).collect()
            },
            grad,
        )?;
        total += weight * loss;
    }
    Ok(total / b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Sgd { momentum: 0.9 }
    }
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Learning rate multiplier reached at the last epoch (linear decay).
    pub final_lr_factor: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 64,
            learning_rate: 1e-3,
            final_lr_factor: 1.0,
            optimizer: Optimizer::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.final_lr_factor > 0.0 && self.final_lr_factor <= 1.0) {
            return Err(Error::invalid("final_lr_factor must lie in (0, 1]"));
        }
        match self.optimizer {
            Optimizer::Sgd { momentum } if !(0.0..1.0).contains(&momentum) => {
                Err(Error::invalid("momentum must lie in [0, 1)"))
            }
            Optimizer::Adam { beta1, beta2, eps }
                if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0) =>
            {
                Err(Error::invalid("Adam needs betas in [0, 1) and eps > 0"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: ScoreNet,
    /// Mean batch loss per epoch.
    pub loss_trace: Vec<f64>,
}

struct OptimizerState {
    kind: Optimizer,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptimizerState {
    fn new(kind: Optimizer, n: usize) -> Self {
        OptimizerState { kind, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        match self.kind {
            Optimizer::Sgd { momentum } => {
                for ((p, g), m) in params.iter_mut().zip(grad).zip(&mut self.m) {
                    *m = momentum * *m + g;
                    *p -= lr * *m;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                }
            }
        }
    }
}

/// Minibatch training on `data`; deterministic given `config.seed`.
pub fn train(mut net: ScoreNet, data: &[ComplexImage], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("training data is empty"));
    }
    let (h, w) = net.shape();
    if let Some(bad) = data.iter().find(|x| x.shape() != (h, w)) {
        return Err(Error::shape(format!("{h}x{w}"), format!("{}x{}", bad.height(), bad.width())));
    }
    let mut rng = stream_rng(config.seed, streams::TRAINING);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![0.0; net.param_count()];
    let mut opt = OptimizerState::new(config.optimizer, net.param_count());
    let mut loss_trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let progress = if config.epochs > 1 { epoch as f64 / (config.epochs - 1) as f64 } else { 0.0 };
        let lr = config.learning_rate * (1.0 - progress * (1.0 - config.final_lr_factor));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<ComplexImage> = chunk.iter().map(|&k| data[k].clone()).collect();
            let draws = draw_noise(net.schedule(), batch.len(), h * w, &mut rng)?;
            let loss = dsm_loss_and_grad(&net, &batch, &draws, &mut grad)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingDiverged { epoch, batch: b, loss });
            }
            opt.step(net.params_mut(), &grad, lr);
            epoch_loss += loss;
            batches += 1;
        }
        loss_trace.push(epoch_loss / batches as f64);
    }
    Ok(TrainOutcome { net, loss_trace })
}

pub const GRADIENT_CHECK_MAX_PARAMS: usize = 1000;

/// Largest relative deviation between analytic and central-difference
/// parameter gradients of the loss on fixed draws.
///
/// Deviations are measured against max(|analytic|, |numeric|, 1e−6·(1 + |loss|)).
pub fn param_gradient_check_with(net: &ScoreNet, batch: &[ComplexImage], draws: &[NoiseDraw], step: f64) -> Result<f64> {
    if net.param_count() > GRADIENT_CHECK_MAX_PARAMS {
        return Err(Error::invalid(format!(
            "gradient check limited to {GRADIENT_CHECK_MAX_PARAMS} parameters, network has {}",
            net.param_count()
        )));
    }
    let mut grad = vec![0.0; net.param_count()];
    let loss = dsm_loss_and_grad(net, batch, draws, &mut grad)?;
    let floor = 1e-6 * (1.0 + loss.abs());
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for k in 0..net.param_count() {
        let p = net.params()[k];
        probe.params_mut()[k] = p + step;
        let up = dsm_loss_fixed(&probe, batch, draws)?;
        probe.params_mut()[k] = p - step;
        let down = dsm_loss_fixed(&probe, batch, draws)?;
        probe.params_mut()[k] = p;
        let numeric = (up - down) / (2.0 * step);
        let scale = grad[k].abs().max(numeric.abs()).max(floor);
        worst = worst.max((grad[k] - numeric).abs() / scale);
    }
    Ok(worst)
}

/// [`param_gradient_check_with`] on draws seeded by `seed`, step 1e−5.
pub fn param_gradient_check(net: &ScoreNet, batch: &[ComplexImage], schedule: &NoiseSchedule, seed: u64) -> Result<f64> {
    if schedule != net.schedule() {
        return Err(Error::invalid("network was built for a different noise schedule"));
    }
    let mut rng = stream_rng(seed, streams::TRAINING);
    let dim = batch.first().map_or(0, |x| x.len());
    let draws = draw_noise(schedule, batch.len(), dim, &mut rng)?;
    param_gradient_check_with(net, batch, &draws, 1e-5)
}
