//! The measurement model y = P·F·S·x + η.

mod coils;
mod fft;
mod mask;
mod operator;

pub use coils::CoilMaps;
pub use fft::Fft2;
pub use mask::{MaskSpec, SamplingMask};
pub use operator::{ForwardOperator, OperatorWork};
