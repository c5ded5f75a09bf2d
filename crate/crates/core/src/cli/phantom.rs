use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::ComplexImage;
use crate::error::{Error, Result};

pub const MIN_PHANTOM_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomKind {
    /// Head-like composite: skull ring, tissue, ventricles and small lesions.
    #[default]
    Ellipses,
    /// The modified Shepp–Logan head.
    SheppLogan,
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ellipses" => Ok(PhantomKind::Ellipses),
            "shepp-logan" => Ok(PhantomKind::SheppLogan),
            other => Err(Error::Config(format!("unknown phantom kind {other:?} (ellipses, shepp-logan)"))),
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhantomKind::Ellipses => "ellipses",
            PhantomKind::SheppLogan => "shepp-logan",
        })
    }
}

/// Ellipse in normalized coordinates [−1, 1]²: intensity, semi-axes, center, rotation (degrees).
#[derive(Debug, Clone, Copy)]
struct Ellipse {
    value: f64,
    a: f64,
    b: f64,
    x0: f64,
    y0: f64,
    phi: f64,
}

impl Ellipse {
    const fn new(value: f64, a: f64, b: f64, x0: f64, y0: f64, phi: f64) -> Self {
        Ellipse { value, a, b, x0, y0, phi }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.phi.to_radians().sin_cos();
        let (dx, dy) = (x - self.x0, y - self.y0);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }
}

const SHEPP_LOGAN: [Ellipse; 10] = [
    Ellipse::new(1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    Ellipse::new(-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    Ellipse::new(-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    Ellipse::new(-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    Ellipse::new(0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    Ellipse::new(0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    Ellipse::new(0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    Ellipse::new(0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    Ellipse::new(0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    Ellipse::new(0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

const HEAD: [Ellipse; 8] = [
    Ellipse::new(0.9, 0.72, 0.9, 0.0, 0.0, 0.0),
    Ellipse::new(-0.5, 0.64, 0.82, 0.0, -0.01, 0.0),
    Ellipse::new(-0.25, 0.12, 0.28, 0.18, 0.05, -15.0),
    Ellipse::new(-0.25, 0.13, 0.3, -0.19, 0.05, 15.0),
    Ellipse::new(0.3, 0.2, 0.14, 0.0, 0.48, 0.0),
    Ellipse::new(0.45, 0.06, 0.06, 0.32, -0.4, 0.0),
    Ellipse::new(0.35, 0.09, 0.05, -0.3, -0.45, 30.0),
    Ellipse::new(0.2, 0.3, 0.12, 0.0, -0.22, 0.0),
];

/// Slowly varying phase, |φ| ≤ 0.65π.
fn smooth_phase(x: f64, y: f64) -> f64 {
    0.5 * PI * (0.6 * x + 0.4 * y + 0.3 * (PI * x).sin() * (PI * y).cos())
}

/// Renders ellipses with 3×3 supersampling and smooth phase, normalized to
/// a maximum magnitude of 1.
fn render(ellipses: &[Ellipse], size: usize) -> Result<ComplexImage> {
    if size < MIN_PHANTOM_SIZE {
        return Err(Error::invalid(format!("phantom size must be at least {MIN_PHANTOM_SIZE}, got {size}")));
    }
    const SUB: usize = 3;
    let n = size as f64;
    let mut magnitude = vec![0.0; size * size];
    for r in 0..size {
        for c in 0..size {
            let mut acc = 0.0;
            for sr in 0..SUB {
                for sc in 0..SUB {
                    let x = -1.0 + 2.0 * (c as f64 + (sc as f64 + 0.5) / SUB as f64) / n;
                    let y = 1.0 - 2.0 * (r as f64 + (sr as f64 + 0.5) / SUB as f64) / n;
                    acc += ellipses.iter().filter(|e| e.contains(x, y)).map(|e| e.value).sum::<f64>();
                }
            }
            magnitude[r * size + c] = (acc / (SUB * SUB) as f64).max(0.0);
        }
    }
    let peak = magnitude.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(Error::invalid("phantom has no positive intensity"));
    }
    let img = ComplexImage::from_fn(size, size, |r, c| {
        let x = -1.0 + 2.0 * (c as f64 + 0.5) / n;
        let y = 1.0 - 2.0 * (r as f64 + 0.5) / n;
        Complex64::from_polar(magnitude[r * size + c] / peak, smooth_phase(x, y))
    });
    // rescale once more so rounding in from_polar cannot leave the peak above 1
    let top = img.magnitude().into_iter().fold(0.0, f64::max);
    Ok(img.scale(1.0 / top))
}

/// Deterministic synthetic test image of `size × size` pixels.
pub fn make_phantom(kind: PhantomKind, size: usize) -> Result<ComplexImage> {
    match kind {
        PhantomKind::Ellipses => render(&HEAD, size),
        PhantomKind::SheppLogan => render(&SHEPP_LOGAN, size),
    }
}

/// Phantom with randomly perturbed ellipse geometry and intensities, for training data.
pub fn random_phantom<R: Rng + ?Sized>(size: usize, rng: &mut R) -> Result<ComplexImage> {
    let mut ellipses = HEAD.to_vec();
    for (k, e) in ellipses.iter_mut().enumerate() {
        let jitter = if k < 2 { 0.05 } else { 0.3 };
        e.a *= 1.0 + jitter * rng.gen_range(-1.0..1.0);
        e.b *= 1.0 + jitter * rng.gen_range(-1.0..1.0);
        if k >= 2 {
            e.x0 += 0.1 * rng.gen_range(-1.0..1.0);
            e.y0 += 0.1 * rng.gen_range(-1.0..1.0);
            e.phi += 30.0 * rng.gen_range(-1.0..1.0);
            e.value *= 1.0 + 0.4 * rng.gen_range(-1.0..1.0);
        }
    }
    render(&ellipses, size)
}
