use rand::Rng;

use crate::domain::rng::standard_complex_normal;
use crate::domain::{ComplexImage, NoiseSchedule};
use crate::error::Result;

/// x_i built by composing single steps x_j = x_{j−1} + √(σ_j² − σ_{j−1}²)·z_j.
pub fn perturb_stepwise<R: Rng + ?Sized>(
    schedule: &NoiseSchedule,
    x0: &ComplexImage,
    i: usize,
    rng: &mut R,
) -> Result<ComplexImage> {
    schedule.check_index(i)?;
    let mut x = x0.clone();
    for j in 1..=i {
        let sd = schedule.step_variance(j)?.sqrt();
        x.as_mut_slice().iter_mut().for_each(|v| *v += standard_complex_normal(rng) * sd);
    }
    Ok(x)
}

/// x_i = x_0 + σ_i·z in one draw.
pub fn perturb_oneshot<R: Rng + ?Sized>(
    schedule: &NoiseSchedule,
    x0: &ComplexImage,
    i: usize,
    rng: &mut R,
) -> Result<ComplexImage> {
    schedule.check_index(i)?;
    let sd = schedule.sigma(i)?;
    let mut x = x0.clone();
    x.as_mut_slice().iter_mut().for_each(|v| *v += standard_complex_normal(rng) * sd);
    Ok(x)
}
