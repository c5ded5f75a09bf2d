use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::artifacts::{redirect_output, Artifacts, Manifest};
use super::config::ScheduleSection;
use super::phantom::{random_phantom, MIN_PHANTOM_SIZE};
use crate::domain::rng::{stream_rng, streams};
use crate::domain::ComplexImage;
use crate::error::{Error, Result};
use crate::prior::GmmPrior;
use crate::score_training::{
    train, write_checkpoint, Activation, Architecture, ConditioningMode, NoiseConditioning, Optimizer, ScoreNet,
    TrainConfig,
};

pub const CHECKPOINT_NAME: &str = "checkpoint.dpscore";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    /// Draws from a mixture file, reshaped to `height × width`.
    Gmm,
    /// Random crops of randomly perturbed phantoms.
    PhantomPatches,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub kind: DataKind,
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub path: Option<PathBuf>,
    #[serde(default = "default_phantom_size")]
    pub phantom_size: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_phantom_size() -> usize {
    32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchKind {
    Mlp,
    Conv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditioningKind {
    Discrete,
    Fourier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub architecture: ArchKind,
    /// Hidden width for the MLP, channel count for the conv net.
    pub width: usize,
    pub activation: Activation,
    pub conditioning: ConditioningKind,
    pub fourier_features: usize,
    pub fourier_std: f64,
    pub seed: u64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            architecture: ArchKind::Mlp,
            width: 64,
            activation: Activation::Silu,
            conditioning: ConditioningKind::Fourier,
            fourier_features: 16,
            fourier_std: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub final_lr_factor: f64,
    pub optimizer: OptimizerKind,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainingSection {
            epochs: d.epochs,
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            final_lr_factor: d.final_lr_factor,
            optimizer: OptimizerKind::Adam,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainingSection {
    fn build(&self) -> TrainConfig {
        let optimizer = match self.optimizer {
            OptimizerKind::Sgd => Optimizer::Sgd { momentum: self.momentum },
            OptimizerKind::Adam => Optimizer::Adam { beta1: self.beta1, beta2: self.beta2, eps: self.eps },
        };
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            final_lr_factor: self.final_lr_factor,
            optimizer,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingRunConfig {
    pub data: DataSection,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub training: TrainingSection,
    pub output: OutputSection,
}

impl TrainingRunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: TrainingRunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let d = &c.data;
        if d.count == 0 || d.height == 0 || d.width == 0 {
            return Err(Error::Config("[data] count, height and width must be positive".into()));
        }
        match d.kind {
            DataKind::Gmm if d.path.is_none() => return Err(Error::Config("data.kind = \"gmm\" needs data.path".into())),
            DataKind::PhantomPatches if d.phantom_size < MIN_PHANTOM_SIZE => {
                return Err(Error::Config(format!("data.phantom_size must be at least {MIN_PHANTOM_SIZE}")))
            }
            DataKind::PhantomPatches if d.height > d.phantom_size || d.width > d.phantom_size => {
                return Err(Error::Config("patches must fit inside the phantom".into()))
            }
            _ => {}
        }
        c.schedule.build().map_err(|e| Error::Config(format!("[schedule] {e}")))?;
        c.training.build().validate().map_err(|e| Error::Config(format!("[training] {e}")))?;
        if c.network.width == 0 {
            return Err(Error::Config("network.width must be positive".into()));
        }
        Ok(c)
    }
}

fn make_dataset(data: &DataSection, base: &Path) -> Result<Vec<ComplexImage>> {
    let mut rng = stream_rng(data.seed, streams::DATA);
    let (h, w) = (data.height, data.width);
    match data.kind {
        DataKind::Gmm => {
            let path = data.path.as_ref().expect("checked at parse time");
            let gmm = GmmPrior::load(&base.join(path))?;
            if gmm.dim() != h * w {
                return Err(Error::Config(format!("mixture dimension {} does not match {h}x{w}", gmm.dim())));
            }
            (0..data.count).map(|_| ComplexImage::from_vec(h, w, gmm.sample(&mut rng))).collect()
        }
        DataKind::PhantomPatches => {
            let n = data.phantom_size;
            (0..data.count)
                .map(|_| {
                    let p = random_phantom(n, &mut rng)?;
                    let (r0, c0) = (rng.gen_range(0..=n - h), rng.gen_range(0..=n - w));
                    Ok(ComplexImage::from_fn(h, w, |r, c| p.get(r0 + r, c0 + c)))
                })
                .collect()
        }
    }
}

/// Trains a score network and writes the checkpoint, loss curve and manifest.
pub fn run_training(config_text: &str, base: &Path, output_root: Option<&Path>) -> Result<(PathBuf, Vec<String>, Manifest)> {
    let config = TrainingRunConfig::from_toml_str(config_text)?;
    let schedule = config.schedule.build()?;
    let data = make_dataset(&config.data, base)?;
    let net_cfg = &config.network;
    let arch = match net_cfg.architecture {
        ArchKind::Mlp => Architecture::Mlp { hidden: net_cfg.width },
        ArchKind::Conv => Architecture::Conv { channels: net_cfg.width },
    };
    let mode = match net_cfg.conditioning {
        ConditioningKind::Discrete => ConditioningMode::Discrete,
        ConditioningKind::Fourier => ConditioningMode::Fourier { features: net_cfg.fourier_features, std: net_cfg.fourier_std },
    };
    let conditioning = NoiseConditioning::new(mode, schedule.len(), net_cfg.seed)?;
    let net = ScoreNet::new(config.data.height, config.data.width, arch, net_cfg.activation, conditioning, &schedule, net_cfg.seed)?;
    let params = net.param_count();
    let outcome = train(net, &data, &config.training.build())?;

    let dir = redirect_output(&config.output.dir, output_root);
    let dir = if dir.is_relative() { base.join(dir) } else { dir };
    let mut art = Artifacts::create(&dir)?;
    let mut ckpt = Vec::new();
    write_checkpoint(&outcome.net, &mut ckpt)?;
    art.bytes(CHECKPOINT_NAME, &ckpt)?;
    let mut loss = String::from("epoch,loss\n");
    for (e, l) in outcome.loss_trace.iter().enumerate() {
        writeln!(loss, "{},{l:.10e}", e + 1).unwrap();
    }
    art.text("loss.csv", &loss)?;
    let mut lines = vec![format!("trained {params} parameters on {} images", data.len())];
    if let (Some(first), Some(last)) = (outcome.loss_trace.first(), outcome.loss_trace.last()) {
        lines.push(format!("loss {first:.4e} -> {last:.4e}"));
    }
    let manifest = art.finish("train", config_text, base, config.training.seed)?;
    lines.push(format!("wrote {}", dir.join(CHECKPOINT_NAME).display()));
    Ok((dir, lines, manifest))
}
