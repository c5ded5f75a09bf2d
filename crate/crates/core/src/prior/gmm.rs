use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use serde::Deserialize;

use super::linalg::{self, Matrix};
use super::ScorePrior;
use crate::domain::rng::standard_complex_normal;
use crate::domain::{ComplexImage, NoiseSchedule};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Vec<Complex64>,
    /// Isotropic complex variance v: the component is CN(mean, v I).
    pub variance: f64,
}

/// Mixture Σ_k w_k CN(μ_k, v_k I) over flattened complex vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmPrior {
    components: Vec<GmmComponent>,
    dim: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GmmFile {
    weights: Vec<f64>,
    variances: Vec<f64>,
    /// Each mean as interleaved [re, im, re, im, ...].
    means: Vec<Vec<f64>>,
}

impl GmmPrior {
    pub fn new(components: Vec<GmmComponent>) -> Result<Self> {
        let first = components.first().ok_or_else(|| Error::invalid("mixture needs a component"))?;
        let dim = first.mean.len();
        if dim == 0 {
            return Err(Error::invalid("mixture dimension must be positive"));
        }
        let mut total = 0.0;
        for (k, c) in components.iter().enumerate() {
            if c.mean.len() != dim {
                return Err(Error::shape(dim, c.mean.len()));
            }
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(Error::invalid(format!("component {k} has weight {}", c.weight)));
            }
            if !(c.variance > 0.0 && c.variance.is_finite()) {
                return Err(Error::NonPositiveVariance(c.variance));
            }
            if c.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::invalid(format!("component {k} has a non-finite mean")));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(GmmPrior { components, dim })
    }

    /// Parses the plain-text form:
    ///
    /// ```text
    /// weights   = [0.3, 0.4, 0.3]
    /// variances = [0.02, 0.02, 0.02]
    /// means     = [[-2.0, 0.0], [2.0, 0.0], [0.0, 2.5]]   # interleaved re, im
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let f: GmmFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if f.weights.len() != f.variances.len() || f.weights.len() != f.means.len() {
            return Err(Error::Config("weights, variances and means must have equal length".into()));
        }
        let components = f
            .weights
            .iter()
            .zip(&f.variances)
            .zip(&f.means)
            .map(|((&weight, &variance), m)| {
                if m.len() % 2 != 0 {
                    return Err(Error::Config("means must interleave real and imaginary parts".into()));
                }
                let mean = m.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
                Ok(GmmComponent { weight, mean, variance })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(components)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        let join = |v: Vec<String>| v.join(", ");
        let weights = join(self.components.iter().map(|c| format!("{:?}", c.weight)).collect());
        let variances = join(self.components.iter().map(|c| format!("{:?}", c.variance)).collect());
        let means = join(
            self.components
                .iter()
                .map(|c| {
                    let parts: Vec<String> = c.mean.iter().flat_map(|m| [format!("{:?}", m.re), format!("{:?}", m.im)]).collect();
                    format!("[{}]", parts.join(", "))
                })
                .collect(),
        );
        format!("weights = [{weights}]\nvariances = [{variances}]\nmeans = [{means}]\n")
    }

    pub fn components(&self) -> &[GmmComponent] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// One draw from the (un-noised) mixture.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Complex64> {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let last = self.components.len() - 1;
        let k = self
            .components
            .iter()
            .position(|c| {
                acc += c.weight;
                u < acc
            })
            .unwrap_or(last);
        let c = &self.components[k];
        let sd = c.variance.sqrt();
        c.mean.iter().map(|m| m + standard_complex_normal(rng) * sd).collect()
    }

    fn check_dim(&self, x: &[Complex64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::shape(self.dim, x.len()));
        }
        Ok(())
    }

    /// log-space responsibilities of the mixture noised by CN(0, sigma_sq I).
    fn log_terms(&self, x: &[Complex64], sigma_sq: f64) -> Vec<f64> {
        let d = self.dim as f64;
        self.components
            .iter()
            .map(|c| {
                let t = c.variance + sigma_sq;
                let dist: f64 = x.iter().zip(&c.mean).map(|(a, b)| (a - b).norm_sqr()).sum();
                c.weight.ln() - dist / t - d * (PI * t).ln()
            })
            .collect()
    }

    /// log of the noised mixture density at x.
    pub fn log_density(&self, x: &[Complex64], sigma_sq: f64) -> Result<f64> {
        self.check_dim(x)?;
        let terms = self.log_terms(x, sigma_sq);
        let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(peak + terms.iter().map(|t| (t - peak).exp()).sum::<f64>().ln())
    }

    pub fn density(&self, x: &[Complex64], sigma_sq: f64) -> Result<f64> {
        self.log_density(x, sigma_sq).map(f64::exp)
    }

    /// Score of Σ_k w_k CN(μ_k, (v_k + σ²) I): responsibility-weighted component scores.
    pub fn score_vec(&self, x: &[Complex64], sigma_sq: f64, out: &mut [Complex64]) -> Result<()> {
        self.check_dim(x)?;
        let mut resp = self.log_terms(x, sigma_sq);
        let peak = resp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for r in resp.iter_mut() {
            *r = (*r - peak).exp();
            total += *r;
        }
        out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
        for (c, r) in self.components.iter().zip(&resp) {
            let r = r / total;
            let t = c.variance + sigma_sq;
            for ((o, xi), mi) in out.iter_mut().zip(x).zip(&c.mean) {
                *o += (mi - xi) / t * r;
            }
        }
        Ok(())
    }
}

impl ScorePrior for GmmPrior {
    fn score_into(
        &self,
        x: &ComplexImage,
        index: usize,
        schedule: &NoiseSchedule,
        out: &mut [Complex64],
    ) -> Result<()> {
        let sigma_sq = schedule.sigma_sq(index)?;
        self.score_vec(x.as_slice(), sigma_sq, out)
    }

    fn supports_exact_posterior(&self) -> bool {
        true
    }
}

/// One Gaussian term of a mixture posterior with full covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorComponent {
    pub weight: f64,
    pub mean: Vec<Complex64>,
    pub covariance: Matrix,
}

/// Exact posterior of a Gaussian-mixture prior under a linear Gaussian likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmPosterior {
    pub components: Vec<PosteriorComponent>,
}

impl GmmPosterior {
    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn mean(&self) -> Vec<Complex64> {
        let d = self.components[0].mean.len();
        let mut m = vec![Complex64::new(0.0, 0.0); d];
        for c in &self.components {
            for (a, b) in m.iter_mut().zip(&c.mean) {
                *a += b * c.weight;
            }
        }
        m
    }

    /// The same mixture as a [`GmmPrior`] when every covariance is a multiple
    /// of the identity (within `tol`).
    pub fn to_isotropic(&self, tol: f64) -> Option<GmmPrior> {
        let comps = self
            .components
            .iter()
            .map(|c| {
                let v = c.covariance[0][0].re;
                for (i, row) in c.covariance.iter().enumerate() {
                    for (j, e) in row.iter().enumerate() {
                        let target = if i == j { v } else { 0.0 };
                        if (e - Complex64::new(target, 0.0)).norm() > tol {
                            return None;
                        }
                    }
                }
                Some(GmmComponent { weight: c.weight, mean: c.mean.clone(), variance: v })
            })
            .collect::<Option<Vec<_>>>()?;
        // renormalize the rounding in the weights
        let total: f64 = comps.iter().map(|c| c.weight).sum();
        let comps = comps.into_iter().map(|c| GmmComponent { weight: c.weight / total, ..c }).collect();
        GmmPrior::new(comps).ok()
    }
}

/// Conjugate update of every mixture component for y = A x + η, η ~ CN(0, noise_var I).
///
/// `a` is the dense measurement matrix (rows = measurements). Component weights
/// are reweighted by the marginal likelihood CN(y; A μ_k, v_k A Aᴴ + noise_var I).
pub fn gmm_exact_posterior(prior: &GmmPrior, a: &Matrix, y: &[Complex64], noise_var: f64) -> Result<GmmPosterior> {
    if !(noise_var > 0.0 && noise_var.is_finite()) {
        return Err(Error::NonPositiveVariance(noise_var));
    }
    let d = prior.dim();
    let m = a.len();
    if m != y.len() {
        return Err(Error::shape(format!("{m} measurements"), y.len()));
    }
    if a.iter().any(|row| row.len() != d) {
        return Err(Error::shape(format!("{d} columns"), "ragged measurement matrix"));
    }

    // AᴴA and A Aᴴ are shared across components
    let mut aha = linalg::zeros(d, d);
    for row in a {
        for i in 0..d {
            for j in 0..d {
                aha[i][j] += row[i].conj() * row[j];
            }
        }
    }
    let mut aah = linalg::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            aah[i][j] = a[i].iter().zip(&a[j]).map(|(p, q)| p * q.conj()).sum();
        }
    }
    let ahy = linalg::adjoint_vec(a, y, d);

    let mut log_w = Vec::with_capacity(prior.components().len());
    let mut parts = Vec::with_capacity(prior.components().len());
    for c in prior.components() {
        // marginal likelihood of y under this component
        let mut cov_y = aah.clone();
        for (i, row) in cov_y.iter_mut().enumerate() {
            for e in row.iter_mut() {
                *e *= c.variance;
            }
            row[i] += noise_var;
        }
        let ly = linalg::cholesky(&cov_y)?;
        let resid: Vec<Complex64> = y.iter().zip(linalg::mat_vec(a, &c.mean)).map(|(yi, ami)| yi - ami).collect();
        let solved = linalg::cholesky_solve(&ly, &resid);
        let quad: f64 = resid.iter().zip(&solved).map(|(r, s)| (r.conj() * s).re).sum();
        log_w.push(c.weight.ln() - quad - linalg::cholesky_log_det(&ly) - m as f64 * PI.ln());

        // posterior precision I/v + AᴴA/σ²
        let mut precision = aha.clone();
        for (i, row) in precision.iter_mut().enumerate() {
            for e in row.iter_mut() {
                *e /= noise_var;
            }
            row[i] += 1.0 / c.variance;
        }
        let lp = linalg::cholesky(&precision)?;
        let rhs: Vec<Complex64> = c.mean.iter().zip(&ahy).map(|(mu, b)| mu / c.variance + b / noise_var).collect();
        let mean = linalg::cholesky_solve(&lp, &rhs);
        parts.push((mean, linalg::cholesky_inverse(&lp)));
    }
    let peak = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = log_w.iter().map(|l| (l - peak).exp()).collect();
    let total: f64 = unnorm.iter().sum();
    let components = parts
        .into_iter()
        .zip(unnorm)
        .map(|((mean, covariance), w)| PosteriorComponent { weight: w / total, mean, covariance })
        .collect();
    Ok(GmmPosterior { components })
}
