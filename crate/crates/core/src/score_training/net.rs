use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::conditioning::{ConditioningMode, NoiseConditioning};
use crate::domain::rng::{stream_rng, streams};
use crate::domain::{ComplexImage, NoiseSchedule};
use crate::error::{Error, Result};
use crate::prior::ScorePrior;

pub const MLP_HIDDEN_LAYERS: usize = 3;
const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    /// Fully connected, three hidden layers of width `hidden`.
    Mlp { hidden: usize },
    /// Two 3×3 conv layers with conditional instance norm, then a 3×3 conv
    /// over the features concatenated with the input.
    Conv { channels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Silu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Silu => x / (1.0 + (-x).exp()),
            Activation::Identity => x,
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-x).exp());
                s * (1.0 + x * (1.0 - s))
            }
            Activation::Identity => 1.0,
        }
    }
}

/// A named slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CondSlot {
    Table { phi: usize, omega: usize },
    Projection { proj: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layer {
    w: usize,
    b: usize,
    outputs: usize,
    inputs: usize,
    cond: Option<CondSlot>,
}

/// Noise-conditioned score network s_θ(x, i).
///
/// Real and imaginary parts enter as two channels; the raw output is divided
/// by σ_i.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreNet {
    height: usize,
    width: usize,
    arch: Architecture,
    activation: Activation,
    conditioning: NoiseConditioning,
    schedule: NoiseSchedule,
    blocks: Vec<ParamBlock>,
    layers: Vec<Layer>,
    params: Vec<f64>,
}

struct LayoutBuilder<'a> {
    blocks: Vec<ParamBlock>,
    layers: Vec<Layer>,
    next: usize,
    cond: &'a NoiseConditioning,
}

impl LayoutBuilder<'_> {
    fn block(&mut self, name: String, rows: usize, cols: usize) -> usize {
        let offset = self.next;
        self.blocks.push(ParamBlock { name, rows, cols, offset });
        self.next += rows * cols;
        offset
    }

    fn layer(&mut self, k: usize, outputs: usize, inputs: usize, conditioned: bool) {
        let w = self.block(format!("w{k}"), outputs, inputs);
        let b = self.block(format!("b{k}"), outputs, 1);
        let cond = conditioned.then(|| match self.cond.mode() {
            ConditioningMode::Discrete => {
                let n = self.cond.n_scales();
                let phi = self.block(format!("phi{k}"), n, outputs);
                let omega = self.block(format!("omega{k}"), n, outputs);
                CondSlot::Table { phi, omega }
            }
            ConditioningMode::Fourier { .. } => {
                let proj = self.block(format!("proj{k}"), outputs, self.cond.embedding_len());
                CondSlot::Projection { proj }
            }
        });
        self.layers.push(Layer { w, b, outputs, inputs, cond });
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, Default)]
struct Tape {
    index: usize,
    embedding: Vec<f64>,
    input: Vec<f64>,
    /// Normalized (conv) or raw (mlp) pre-conditioning activations per hidden layer.
    normed: Vec<Vec<f64>>,
    /// 1/s_k per channel (conv only).
    inv_std: Vec<Vec<f64>>,
    cond_out: Vec<Vec<f64>>,
    hidden: Vec<Vec<f64>>,
    /// Input of the output layer.
    last_in: Vec<f64>,
}

pub(crate) fn to_channels(x: &[Complex64]) -> Vec<f64> {
    let mut u = Vec::with_capacity(2 * x.len());
    u.extend(x.iter().map(|z| z.re));
    u.extend(x.iter().map(|z| z.im));
    u
}

pub(crate) fn from_channels(u: &[f64], out: &mut [Complex64]) {
    let n = out.len();
    for (k, o) in out.iter_mut().enumerate() {
        *o = Complex64::new(u[k], u[n + k]);
    }
}

impl ScoreNet {
    pub fn new(
        height: usize,
        width: usize,
        arch: Architecture,
        activation: Activation,
        conditioning: NoiseConditioning,
        schedule: &NoiseSchedule,
        seed: u64,
    ) -> Result<Self> {
        let mut net = Self::with_zero_params(height, width, arch, activation, conditioning, schedule)?;
        net.initialize(seed);
        Ok(net)
    }

    pub(crate) fn with_zero_params(
        height: usize,
        width: usize,
        arch: Architecture,
        activation: Activation,
        conditioning: NoiseConditioning,
        schedule: &NoiseSchedule,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("network input must be non-empty"));
        }
        if conditioning.n_scales() != schedule.len() {
            return Err(Error::shape(
                format!("{} noise scales", schedule.len()),
                format!("conditioning over {}", conditioning.n_scales()),
            ));
        }
        let dim = 2 * height * width;
        let mut b = LayoutBuilder { blocks: Vec::new(), layers: Vec::new(), next: 0, cond: &conditioning };
        match arch {
            Architecture::Mlp { hidden } => {
                if hidden == 0 {
                    return Err(Error::invalid("hidden width must be positive"));
                }
                let mut inputs = dim;
                for k in 0..MLP_HIDDEN_LAYERS {
                    b.layer(k, hidden, inputs, true);
                    inputs = hidden;
                }
                b.layer(MLP_HIDDEN_LAYERS, dim, hidden, false);
            }
            Architecture::Conv { channels } => {
                if channels == 0 {
                    return Err(Error::invalid("channel count must be positive"));
                }
                if height * width < 4 {
                    return Err(Error::invalid("instance norm needs at least 4 pixels"));
                }
                b.layer(0, channels, 2 * 9, true);
                b.layer(1, channels, channels * 9, true);
                b.layer(2, 2, (channels + 2) * 9, false);
            }
        }
        let (blocks, layers, total) = (b.blocks, b.layers, b.next);
        Ok(ScoreNet {
            height,
            width,
            arch,
            activation,
            conditioning,
            schedule: schedule.clone(),
            blocks,
            layers,
            params: vec![0.0; total],
        })
    }

    fn initialize(&mut self, seed: u64) {
        let mut rng = stream_rng(seed, streams::INIT);
        for block in &self.blocks {
            let range = block.offset..block.offset + block.len();
            let name = block.name.as_str();
            if name.starts_with('b') || name.starts_with("omega") {
                continue;
            }
            if name.starts_with("phi") {
                self.params[range].iter_mut().for_each(|p| *p = 1.0);
                continue;
            }
            let scale = 1.0 / (block.cols as f64).sqrt();
            for p in &mut self.params[range] {
                *p = scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn conditioning(&self) -> &NoiseConditioning {
        &self.conditioning
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::shape(self.params.len(), params.len()));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("parameters must be finite"));
        }
        self.params = params;
        Ok(())
    }

    /// Real input length (two channels).
    pub fn dim(&self) -> usize {
        2 * self.height * self.width
    }

    fn check_input(&self, x: &ComplexImage) -> Result<()> {
        if x.shape() != (self.height, self.width) {
            return Err(Error::shape(
                format!("{}x{}", self.height, self.width),
                format!("{}x{}", x.height(), x.width()),
            ));
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &ComplexImage, i: usize) -> Result<ComplexImage> {
        self.check_input(x)?;
        let (s, _) = self.forward(&to_channels(x.as_slice()), i)?;
        let mut out = ComplexImage::zeros(self.height, self.width);
        from_channels(&s, out.as_mut_slice());
        Ok(out)
    }

    fn sigma(&self, i: usize) -> Result<f64> {
        self.conditioning.check_index(i)?;
        self.schedule.sigma(i)
    }

    /// (γ, β) of a conditioned layer at index i; γ is None for pure shifts.
    fn cond_vectors(&self, slot: CondSlot, width: usize, i: usize, emb: &[f64]) -> (Option<&[f64]>, Vec<f64>) {
        match slot {
            CondSlot::Table { phi, omega } => {
                let row = (i - 1) * width;
                let gamma = &self.params[phi + row..phi + row + width];
                (Some(gamma), self.params[omega + row..omega + row + width].to_vec())
            }
            CondSlot::Projection { proj } => {
                let e = emb.len();
                let beta = (0..width)
                    .map(|k| self.params[proj + k * e..proj + (k + 1) * e].iter().zip(emb).map(|(p, x)| p * x).sum())
                    .collect();
                (None, beta)
            }
        }
    }

    /// Accumulates parameter gradients of the conditioning and returns dL/dn.
    /// `spatial` is the number of positions sharing each channel's (γ, β).
    fn cond_backward(
        &self,
        slot: CondSlot,
        width: usize,
        spatial: usize,
        tape: &Tape,
        normed: &[f64],
        dc: &[f64],
        grad: &mut [f64],
    ) -> Vec<f64> {
        let i = tape.index;
        let channel_sum = |v: &[f64], k: usize| -> f64 { v[k * spatial..(k + 1) * spatial].iter().sum() };
        match slot {
            CondSlot::Table { phi, omega } => {
                let row = (i - 1) * width;
                let mut dn = vec![0.0; dc.len()];
                for k in 0..width {
                    let gamma = self.params[phi + row + k];
                    let mut dgamma = 0.0;
                    for p in k * spatial..(k + 1) * spatial {
                        dgamma += dc[p] * normed[p];
                        dn[p] = dc[p] * gamma;
                    }
                    grad[phi + row + k] += dgamma;
                    grad[omega + row + k] += channel_sum(dc, k);
                }
                dn
            }
            CondSlot::Projection { proj } => {
                let e = tape.embedding.len();
                for k in 0..width {
                    let db = channel_sum(dc, k);
                    for (g, x) in grad[proj + k * e..proj + (k + 1) * e].iter_mut().zip(&tape.embedding) {
                        *g += db * x;
                    }
                }
                dc.to_vec()
            }
        }
    }

    fn forward(&self, u: &[f64], i: usize) -> Result<(Vec<f64>, Tape)> {
        let sigma = self.sigma(i)?;
        let mut tape = Tape {
            index: i,
            embedding: match self.conditioning.mode() {
                ConditioningMode::Fourier { .. } => self.conditioning.embed(i)?,
                ConditioningMode::Discrete => Vec::new(),
            },
            input: u.to_vec(),
            ..Default::default()
        };
        let mut out = match self.arch {
            Architecture::Mlp { .. } => self.mlp_forward(&mut tape),
            Architecture::Conv { channels } => self.conv_forward(channels, &mut tape),
        };
        out.iter_mut().for_each(|o| *o /= sigma);
        Ok((out, tape))
    }

    fn backward(&self, tape: &Tape, ds: &[f64], grad: &mut [f64]) -> Result<()> {
        let sigma = self.sigma(tape.index)?;
        let d_out: Vec<f64> = ds.iter().map(|d| d / sigma).collect();
        match self.arch {
            Architecture::Mlp { .. } => self.mlp_backward(tape, &d_out, grad),
            Architecture::Conv { channels } => self.conv_backward(channels, tape, &d_out, grad),
        }
        Ok(())
    }

    fn dense(&self, layer: &Layer, x: &[f64]) -> Vec<f64> {
        let w = &self.params[layer.w..layer.w + layer.outputs * layer.inputs];
        (0..layer.outputs)
            .map(|r| self.params[layer.b + r] + w[r * layer.inputs..(r + 1) * layer.inputs].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    /// Parameter gradients of a dense layer; returns dL/dx.
    fn dense_backward(&self, layer: &Layer, x: &[f64], da: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let mut dx = vec![0.0; layer.inputs];
        for (r, d) in da.iter().enumerate() {
            grad[layer.b + r] += d;
            let row = layer.w + r * layer.inputs;
            for c in 0..layer.inputs {
                grad[row + c] += d * x[c];
                dx[c] += d * self.params[row + c];
            }
        }
        dx
    }

    fn apply_cond(&self, layer: &Layer, spatial: usize, tape: &Tape, normed: &[f64]) -> Vec<f64> {
        let Some(slot) = layer.cond else { return normed.to_vec() };
        let (gamma, beta) = self.cond_vectors(slot, layer.outputs, tape.index, &tape.embedding);
        normed
            .iter()
            .enumerate()
            .map(|(p, n)| {
                let k = p / spatial;
                gamma.map_or(1.0, |g| g[k]) * n + beta[k]
            })
            .collect()
    }

    fn mlp_forward(&self, tape: &mut Tape) -> Vec<f64> {
        let mut h = tape.input.clone();
        for layer in &self.layers[..MLP_HIDDEN_LAYERS] {
            let a = self.dense(layer, &h);
            let c = self.apply_cond(layer, 1, tape, &a);
            h = c.iter().map(|v| self.activation.apply(*v)).collect();
            tape.normed.push(a);
            tape.cond_out.push(c);
            tape.hidden.push(h.clone());
        }
        tape.last_in = h;
        self.dense(&self.layers[MLP_HIDDEN_LAYERS], &tape.last_in)
    }

    fn mlp_backward(&self, tape: &Tape, d_out: &[f64], grad: &mut [f64]) {
        let mut dh = self.dense_backward(&self.layers[MLP_HIDDEN_LAYERS], &tape.last_in, d_out, grad);
        for l in (0..MLP_HIDDEN_LAYERS).rev() {
            let layer = &self.layers[l];
            let dc: Vec<f64> = dh.iter().zip(&tape.cond_out[l]).map(|(d, c)| d * self.activation.derivative(*c)).collect();
            let da = match layer.cond {
                Some(slot) => self.cond_backward(slot, layer.outputs, 1, tape, &tape.normed[l], &dc, grad),
                None => dc,
            };
            let below = if l == 0 { &tape.input } else { &tape.hidden[l - 1] };
            dh = self.dense_backward(layer, below, &da, grad);
        }
    }

    fn conv(&self, layer: &Layer, x: &[f64]) -> Vec<f64> {
        let (h, w) = (self.height, self.width);
        let m = h * w;
        let cin = layer.inputs / 9;
        let mut out = vec![0.0; layer.outputs * m];
        for o in 0..layer.outputs {
            let bias = self.params[layer.b + o];
            let plane = &mut out[o * m..(o + 1) * m];
            plane.iter_mut().for_each(|v| *v = bias);
            for c in 0..cin {
                let src = &x[c * m..(c + 1) * m];
                for (t, (dy, dx)) in taps().enumerate() {
                    let k = self.params[layer.w + o * layer.inputs + c * 9 + t];
                    for_each_shift(h, w, dy, dx, |dst, s| plane[dst] += k * src[s]);
                }
            }
        }
        out
    }

    fn conv_backward_layer(&self, layer: &Layer, x: &[f64], dout: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let (h, w) = (self.height, self.width);
        let m = h * w;
        let cin = layer.inputs / 9;
        let mut dx = vec![0.0; cin * m];
        for o in 0..layer.outputs {
            let dplane = &dout[o * m..(o + 1) * m];
            grad[layer.b + o] += dplane.iter().sum::<f64>();
            for c in 0..cin {
                let src = &x[c * m..(c + 1) * m];
                let dsrc = &mut dx[c * m..(c + 1) * m];
                for (t, (dy, dxo)) in taps().enumerate() {
                    let idx = layer.w + o * layer.inputs + c * 9 + t;
                    let k = self.params[idx];
                    let mut gk = 0.0;
                    for_each_shift(h, w, dy, dxo, |dst, s| {
                        gk += dplane[dst] * src[s];
                        dsrc[s] += k * dplane[dst];
                    });
                    grad[idx] += gk;
                }
            }
        }
        dx
    }

    fn instance_norm(&self, a: &[f64], channels: usize) -> (Vec<f64>, Vec<f64>) {
        let m = self.height * self.width;
        let mut normed = vec![0.0; a.len()];
        let mut inv = vec![0.0; channels];
        for k in 0..channels {
            let plane = &a[k * m..(k + 1) * m];
            let mean = plane.iter().sum::<f64>() / m as f64;
            let var = plane.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64;
            inv[k] = 1.0 / (var + NORM_EPS).sqrt();
            for (n, v) in normed[k * m..(k + 1) * m].iter_mut().zip(plane) {
                *n = (v - mean) * inv[k];
            }
        }
        (normed, inv)
    }

    fn instance_norm_backward(&self, normed: &[f64], inv: &[f64], dn: &[f64]) -> Vec<f64> {
        let m = self.height * self.width;
        let mut da = vec![0.0; dn.len()];
        for (k, s) in inv.iter().enumerate() {
            let r = k * m..(k + 1) * m;
            let mean_d = dn[r.clone()].iter().sum::<f64>() / m as f64;
            let mean_dn = dn[r.clone()].iter().zip(&normed[r.clone()]).map(|(a, b)| a * b).sum::<f64>() / m as f64;
            for p in r {
                da[p] = s * (dn[p] - mean_d - normed[p] * mean_dn);
            }
        }
        da
    }

    fn conv_forward(&self, channels: usize, tape: &mut Tape) -> Vec<f64> {
        let m = self.height * self.width;
        let mut h = tape.input.clone();
        for layer in &self.layers[..2] {
            let a = self.conv(layer, &h);
            let (normed, inv) = self.instance_norm(&a, channels);
            let c = self.apply_cond(layer, m, tape, &normed);
            h = c.iter().map(|v| self.activation.apply(*v)).collect();
            tape.normed.push(normed);
            tape.inv_std.push(inv);
            tape.cond_out.push(c);
            tape.hidden.push(h.clone());
        }
        let mut last = h;
        last.extend_from_slice(&tape.input);
        tape.last_in = last;
        self.conv(&self.layers[2], &tape.last_in)
    }

    fn conv_backward(&self, channels: usize, tape: &Tape, d_out: &[f64], grad: &mut [f64]) {
        let m = self.height * self.width;
        let d_last = self.conv_backward_layer(&self.layers[2], &tape.last_in, d_out, grad);
        let mut dh = d_last[..channels * m].to_vec();
        for l in (0..2).rev() {
            let layer = &self.layers[l];
            let dc: Vec<f64> = dh.iter().zip(&tape.cond_out[l]).map(|(d, c)| d * self.activation.derivative(*c)).collect();
            let dn = match layer.cond {
                Some(slot) => self.cond_backward(slot, layer.outputs, m, tape, &tape.normed[l], &dc, grad),
                None => dc,
            };
            let da = self.instance_norm_backward(&tape.normed[l], &tape.inv_std[l], &dn);
            let below = if l == 0 { &tape.input } else { &tape.hidden[l - 1] };
            dh = self.conv_backward_layer(layer, below, &da, grad);
        }
    }

    /// Forward pass on a two-channel input, then `grad += (∂s/∂θ)ᵀ ds` with
    /// `ds` computed from the output by `ds_fn`.
    pub(crate) fn forward_backward(&self, u: &[f64], i: usize, ds_fn: impl FnOnce(&[f64]) -> Vec<f64>, grad: &mut [f64]) -> Result<Vec<f64>> {
        let (s, tape) = self.forward(u, i)?;
        let ds = ds_fn(&s);
        self.backward(&tape, &ds, grad)?;
        Ok(s)
    }

    pub(crate) fn forward_real(&self, u: &[f64], i: usize) -> Result<Vec<f64>> {
        self.forward(u, i).map(|(s, _)| s)
    }
}

fn taps() -> impl Iterator<Item = (isize, isize)> {
    (-1..=1).flat_map(|dy| (-1..=1).map(move |dx| (dy, dx)))
}

/// Calls f(dst, src) for every output pixel whose zero-padded neighbour at
/// offset (dy, dx) lies inside the image.
fn for_each_shift(h: usize, w: usize, dy: isize, dx: isize, mut f: impl FnMut(usize, usize)) {
    let y0 = (-dy).max(0) as usize;
    let y1 = (h as isize - dy.max(0)) as usize;
    let x0 = (-dx).max(0) as usize;
    let x1 = (w as isize - dx.max(0)) as usize;
    for y in y0..y1 {
        let sy = (y as isize + dy) as usize;
        for x in x0..x1 {
            f(y * w + x, sy * w + (x as isize + dx) as usize);
        }
    }
}

impl ScorePrior for ScoreNet {
    fn score_into(&self, x: &ComplexImage, index: usize, schedule: &NoiseSchedule, out: &mut [Complex64]) -> Result<()> {
        if schedule.sigmas() != self.schedule.sigmas() {
            return Err(Error::invalid("network was trained on a different noise schedule"));
        }
        self.check_input(x)?;
        let s = self.forward_real(&to_channels(x.as_slice()), index)?;
        from_channels(&s, out);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schedule() -> NoiseSchedule {
        NoiseSchedule::geometric(0.1, 5.0, 6).unwrap()
    }

    fn mlp(mode: ConditioningMode) -> ScoreNet {
        let cond = NoiseConditioning::new(mode, 6, 3).unwrap();
        ScoreNet::new(1, 2, Architecture::Mlp { hidden: 5 }, Activation::Silu, cond, &schedule(), 11).unwrap()
    }

    #[test]
    fn output_matches_input_shape() {
        let net = mlp(ConditioningMode::default());
        let x = ComplexImage::from_vec(1, 2, vec![Complex64::new(0.3, -0.2), Complex64::new(1.0, 0.5)]).unwrap();
        let s = net.evaluate(&x, 3).unwrap();
        assert_eq!(s.shape(), (1, 2));
        assert!(s.is_finite());
        assert!(net.evaluate(&ComplexImage::zeros(2, 2), 3).is_err());
        assert!(net.evaluate(&x, 0).is_err());
        assert!(net.evaluate(&x, 7).is_err());
    }

    #[test]
    fn layout_covers_every_parameter() {
        for mode in [ConditioningMode::Discrete, ConditioningMode::Fourier { features: 3, std: 1.0 }] {
            let net = mlp(mode);
            let mut next = 0;
            for b in net.blocks() {
                assert_eq!(b.offset, next);
                next += b.len();
            }
            assert_eq!(next, net.param_count());
        }
    }

    #[test]
    fn discrete_tables_start_as_identity() {
        let net = mlp(ConditioningMode::Discrete);
        for b in net.blocks() {
            let vals = &net.params()[b.offset..b.offset + b.len()];
            if b.name.starts_with("phi") {
                assert!(vals.iter().all(|v| *v == 1.0));
            }
            if b.name.starts_with("omega") {
                assert!(vals.iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn output_scales_with_inverse_sigma() {
        // with identical conditioning at two indices only the 1/σ_i factor differs
        let cond = NoiseConditioning::discrete(6).unwrap();
        let net = ScoreNet::new(1, 1, Architecture::Mlp { hidden: 4 }, Activation::Silu, cond, &schedule(), 2).unwrap();
        let x = ComplexImage::point(0.4, 0.1);
        let a = net.evaluate(&x, 2).unwrap().get(0, 0);
        let b = net.evaluate(&x, 5).unwrap().get(0, 0);
        let s = schedule();
        let ratio = s.sigma(5).unwrap() / s.sigma(2).unwrap();
        assert!((a - b * ratio).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn conv_net_evaluates() {
        let cond = NoiseConditioning::discrete(6).unwrap();
        let net = ScoreNet::new(4, 5, Architecture::Conv { channels: 3 }, Activation::Silu, cond, &schedule(), 2).unwrap();
        let x = ComplexImage::from_fn(4, 5, |r, c| Complex64::new(r as f64 * 0.1, c as f64 * -0.2));
        let s = net.evaluate(&x, 4).unwrap();
        assert_eq!(s.shape(), (4, 5));
        assert!(s.is_finite());
        let cond = NoiseConditioning::discrete(6).unwrap();
        assert!(ScoreNet::new(1, 2, Architecture::Conv { channels: 3 }, Activation::Silu, cond, &schedule(), 2).is_err());
    }

    #[test]
    fn shift_helper_visits_valid_neighbours() {
        let mut pairs = Vec::new();
        for_each_shift(2, 3, 1, -1, |d, s| pairs.push((d, s)));
        // rows 0 only (row 1 has no row below), cols 1..3
        assert_eq!(pairs, vec![(1, 3), (2, 4)]);
    }

    #[test]
    fn rejects_mismatched_schedule() {
        let cond = NoiseConditioning::discrete(5).unwrap();
        assert!(ScoreNet::new(1, 1, Architecture::Mlp { hidden: 2 }, Activation::Silu, cond, &schedule(), 0).is_err());
        let net = mlp(ConditioningMode::Discrete);
        let other = NoiseSchedule::geometric(0.2, 5.0, 6).unwrap();
        assert!(net.score(&ComplexImage::zeros(1, 2), 2, &other).is_err());
    }
}
