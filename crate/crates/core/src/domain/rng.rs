//! Seeded random streams.
//!
//! Every chain draws from its own ChaCha stream keyed by `(seed, stream id)`, so
//! results do not depend on how chains are scheduled across threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type ChainRng = ChaCha8Rng;

/// Stream ids for the different phases of a sampling run.
pub mod streams {
    /// Burn-in chain shared by all split chains.
    pub const BURN_IN: u64 = 1 << 62;
    /// Offset for the chains forked after the burn-in.
    pub const SPLIT: u64 = 1 << 61;
    /// Measurement noise.
    pub const MEASUREMENT: u64 = 1 << 60;
    /// Training data, shuffling and noise draws.
    pub const TRAINING: u64 = 1 << 59;
    /// Network parameter initialisation and random Fourier features.
    pub const INIT: u64 = 1 << 58;
    /// Sampling masks.
    pub const MASK: u64 = 1 << 57;
    /// Synthetic training sets.
    pub const DATA: u64 = 1 << 56;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Circularly-symmetric complex normal CN(0, 1): real and imaginary parts
/// each have variance 1/2.
pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn fill_complex_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [Complex64]) {
    for v in out {
        *v = standard_complex_normal(rng);
    }
}
