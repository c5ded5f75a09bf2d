//! Value types shared across the crate.

mod config;
mod image;
mod kspace;
pub mod rng;
mod schedule;

pub use config::{LikelihoodWeight, SamplerConfig};
pub use image::ComplexImage;
pub use kspace::KSpaceData;
pub use schedule::NoiseSchedule;
