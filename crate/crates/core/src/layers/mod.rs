//! Single-layer locally orderless networks and their convolutional baseline.
//!
//! A layer computes, for kernel `j` and bin `i`,
//! `h_ij = W_j * act(b_ij - (I * K_j); sigma_ij)` and feeds the `M * N`
//! channels to a linear head. With the bell activation this is a stack of
//! soft local histograms; with a sigmoid-family activation and `N = 1` it is
//! an ordinary convolution layer.

mod activation;
mod checkpoint;
mod emulate;
mod params;

use rand::Rng;

pub use activation::{normal_cdf, Activation, Response};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use emulate::{cumulative_bins, emulate_cnn_from_lon, emulation_error, EmulationError};
pub use params::{FieldGroup, GradVector, Layout, ParamVector};

use crate::error::{argument, dimension, Result};
use crate::image::convolve::{adjoint_into, dot, Padded};
use crate::image::{convolve, convolve_adjoint, gaussian_kernel, BoundaryMode, Image, Kernel};
use crate::rng::{stream_rng, Stream};

/// Fixed spatial aggregation `W_j` applied to each activation map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoother {
    Delta,
    Gaussian { sigma: f64, radius: usize },
}

impl Smoother {
    fn kernel(&self) -> Result<Option<Kernel>> {
        match *self {
            Smoother::Delta => Ok(None),
            Smoother::Gaussian { sigma, radius } => gaussian_kernel(sigma, radius).map(Some),
        }
    }
}

/// Shape of the linear head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadSpec {
    /// Per-pixel weights over all channels, bound to one image size.
    Dense { outputs: usize, width: usize, height: usize },
    /// 1x1 convolution to a single map; `pooled` averages it to a scalar.
    OneByOne { pooled: bool },
}

impl HeadSpec {
    pub fn outputs(&self) -> usize {
        match *self {
            HeadSpec::Dense { outputs, .. } => outputs,
            HeadSpec::OneByOne { .. } => 1,
        }
    }
}

/// Architecture of a layer, without parameter values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub activation: Activation,
    /// Number of kernels `M`.
    pub kernels: usize,
    /// Bias bins per kernel `N`; 1 for a plain CNN.
    pub bins: usize,
    pub kernel_side: usize,
    pub head: HeadSpec,
    pub boundary: BoundaryMode,
    pub sigma_learnable: bool,
    pub smoother: Smoother,
}

impl LayerSpec {
    pub fn lon(kernels: usize, bins: usize, kernel_side: usize, head: HeadSpec) -> Self {
        Self {
            activation: Activation::GaussBell,
            kernels,
            bins,
            kernel_side,
            head,
            boundary: BoundaryMode::Reflect,
            sigma_learnable: true,
            smoother: Smoother::Delta,
        }
    }

    pub fn cnn(activation: Activation, kernels: usize, kernel_side: usize, head: HeadSpec) -> Self {
        Self { activation, bins: 1, ..Self::lon(kernels, 1, kernel_side, head) }
    }

    pub fn channels(&self) -> usize {
        self.kernels * self.bins
    }

    fn validate(&self) -> Result<()> {
        if self.kernels == 0 || self.bins == 0 {
            return Err(argument("a layer needs at least one kernel and one bin"));
        }
        if self.kernel_side.is_multiple_of(2) {
            return Err(argument(format!("kernel side must be odd, got {}", self.kernel_side)));
        }
        match self.head {
            HeadSpec::Dense { outputs, width, height } if outputs == 0 || width == 0 || height == 0 => {
                Err(argument("dense head dimensions must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// Learnable head parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub spec: HeadSpec,
    /// Dense: `[o][c][k]`; 1x1: `[c]`.
    pub weights: Vec<f64>,
    /// One entry per output.
    pub bias: Vec<f64>,
}

/// Layer output: a map for unpooled 1x1 heads, otherwise a vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Map(Image),
    Vector(Vec<f64>),
}

impl Output {
    pub fn values(&self) -> &[f64] {
        match self {
            Output::Map(img) => img.data(),
            Output::Vector(v) => v,
        }
    }

    pub fn len(&self) -> usize {
        self.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.values().is_empty()
    }
}

/// Intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTape {
    input: Image,
    padded: Padded,
    /// `I * K_j`, one map per kernel.
    responses: Vec<Vec<f64>>,
    /// Activation maps per channel `c = j * N + i`.
    activations: Vec<Vec<f64>>,
    /// `W_j * activation` when the smoother is not a delta.
    smoothed: Vec<Option<Vec<f64>>>,
    output: Output,
}

impl ForwardTape {
    pub fn input(&self) -> &Image {
        &self.input
    }

    pub fn output(&self) -> &Output {
        &self.output
    }

    pub fn response(&self, j: usize) -> &[f64] {
        &self.responses[j]
    }

    /// Channel map fed to the head.
    pub fn channel(&self, c: usize) -> &[f64] {
        self.smoothed[c].as_deref().unwrap_or(&self.activations[c])
    }
}

fn order_free_sum(values: &mut [f64]) -> f64 {
    if values.len() > 2 {
        values.sort_unstable_by(f64::total_cmp);
    }
    values.iter().sum()
}

/// Parameter counts: the closed-form count over kernels and head weights,
/// and every learnable scalar including biases and widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCount {
    pub formula: usize,
    pub actual: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    spec: LayerSpec,
    kernels: Vec<Kernel>,
    bias: Vec<f64>,
    log_sigma: Vec<f64>,
    head: Head,
}

impl Layer {
    /// All parameters zero, widths 1.
    pub fn zeroed(spec: LayerSpec) -> Result<Self> {
        spec.validate()?;
        let c = spec.channels();
        let kernels = (0..spec.kernels)
            .map(|_| Kernel::new(spec.kernel_side, vec![0.0; spec.kernel_side * spec.kernel_side]))
            .collect::<Result<Vec<_>>>()?;
        let weights = match spec.head {
            HeadSpec::Dense { outputs, width, height } => vec![0.0; outputs * c * width * height],
            HeadSpec::OneByOne { .. } => vec![0.0; c],
        };
        let head = Head { spec: spec.head, weights, bias: vec![0.0; spec.head.outputs()] };
        Ok(Self { spec, kernels, bias: vec![0.0; c], log_sigma: vec![0.0; c], head })
    }

    /// Seeded initialisation. Kernels are uniform in `±1/|K|`; each kernel's
    /// bias grid spans the range of its responses over `sample`, with widths
    /// of half the grid spacing; head weights are uniform in `±1/sqrt(fan_in)`.
    pub fn initialise(spec: LayerSpec, seed: u64, sample: &[Image]) -> Result<Self> {
        if sample.is_empty() {
            return Err(argument("initialisation needs at least one image"));
        }
        let mut layer = Self::zeroed(spec)?;
        let mut rng = stream_rng(seed, Stream::Init, 0);
        let bound = 1.0 / (spec.kernel_side * spec.kernel_side) as f64;
        for k in &mut layer.kernels {
            for t in k.taps_mut() {
                *t = rng.gen_range(-bound..=bound);
            }
        }
        for j in 0..spec.kernels {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for img in sample {
                let r = convolve(img, &layer.kernels[j], spec.boundary)?;
                lo = lo.min(r.min());
                hi = hi.max(r.max());
            }
            layer.set_bias_grid(j, lo, hi);
        }
        let fan_in = layer.head.weights.len() / spec.head.outputs();
        let bound = 1.0 / (fan_in as f64).sqrt();
        for w in &mut layer.head.weights {
            *w = rng.gen_range(-bound..=bound);
        }
        Ok(layer)
    }

    /// Regular bias grid over `[lo, hi]` for kernel `j`, widths `Δb / 2`.
    /// A single bin sits at the midpoint with `Δb = hi - lo`.
    pub fn set_bias_grid(&mut self, j: usize, lo: f64, hi: f64) {
        let n = self.spec.bins;
        let range = hi - lo;
        let step = match n {
            1 => range,
            _ => range / (n - 1) as f64,
        };
        let step = if step > 0.0 && step.is_finite() { step } else { 1.0 };
        for i in 0..n {
            self.bias[j * n + i] = if n == 1 { 0.5 * (lo + hi) } else { lo + i as f64 * step };
            self.log_sigma[j * n + i] = (0.5 * step).ln();
        }
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn activation(&self) -> Activation {
        self.spec.activation
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn kernels_mut(&mut self) -> &mut [Kernel] {
        &mut self.kernels
    }

    pub fn bias(&self, j: usize, i: usize) -> f64 {
        self.bias[j * self.spec.bins + i]
    }

    pub fn set_bias(&mut self, j: usize, i: usize, value: f64) {
        let n = self.spec.bins;
        self.bias[j * n + i] = value;
    }

    pub fn sigma(&self, j: usize, i: usize) -> f64 {
        self.log_sigma[j * self.spec.bins + i].exp()
    }

    pub fn set_sigma(&mut self, j: usize, i: usize, sigma: f64) -> Result<()> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(argument(format!("width must be positive, got {sigma}")));
        }
        let n = self.spec.bins;
        self.log_sigma[j * n + i] = sigma.ln();
        Ok(())
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut Head {
        &mut self.head
    }

    pub fn layout(&self) -> Layout {
        let s = &self.spec;
        let widths = if s.sigma_learnable && s.activation.has_width() { s.channels() } else { 0 };
        Layout::from_sizes(&[
            (FieldGroup::Kernels, s.kernels * s.kernel_side * s.kernel_side),
            (FieldGroup::Biases, s.channels()),
            (FieldGroup::Widths, widths),
            (FieldGroup::HeadWeights, self.head.weights.len()),
            (FieldGroup::HeadBias, self.head.bias.len()),
        ])
    }

    pub fn params(&self) -> ParamVector {
        let mut p = ParamVector::zeros(self.layout());
        let kernel_taps: Vec<f64> = self.kernels.iter().flat_map(|k| k.taps().iter().copied()).collect();
        p.group_mut(FieldGroup::Kernels).copy_from_slice(&kernel_taps);
        p.group_mut(FieldGroup::Biases).copy_from_slice(&self.bias);
        if p.layout.range(FieldGroup::Widths).is_some() {
            p.group_mut(FieldGroup::Widths).copy_from_slice(&self.log_sigma);
        }
        p.group_mut(FieldGroup::HeadWeights).copy_from_slice(&self.head.weights);
        p.group_mut(FieldGroup::HeadBias).copy_from_slice(&self.head.bias);
        p
    }

    pub fn set_params(&mut self, p: &ParamVector) -> Result<()> {
        if p.layout != self.layout() {
            return Err(dimension("parameter layout does not match this layer"));
        }
        let taps = p.group(FieldGroup::Kernels);
        let per = self.spec.kernel_side * self.spec.kernel_side;
        for (k, chunk) in self.kernels.iter_mut().zip(taps.chunks_exact(per)) {
            k.taps_mut().copy_from_slice(chunk);
        }
        self.bias.copy_from_slice(p.group(FieldGroup::Biases));
        if p.layout.range(FieldGroup::Widths).is_some() {
            self.log_sigma.copy_from_slice(p.group(FieldGroup::Widths));
        }
        self.head.weights.copy_from_slice(p.group(FieldGroup::HeadWeights));
        self.head.bias.copy_from_slice(p.group(FieldGroup::HeadBias));
        Ok(())
    }

    pub fn count_params(&self) -> ParamCount {
        let s = &self.spec;
        let kernel_taps = s.kernels * s.kernel_side * s.kernel_side;
        let formula = match s.head {
            HeadSpec::Dense { width, height, .. } => s.channels() * width * height + kernel_taps,
            HeadSpec::OneByOne { .. } => kernel_taps + s.channels() + 1,
        };
        ParamCount { formula, actual: self.layout().len() }
    }

    fn check_input(&self, img: &Image) -> Result<()> {
        if let HeadSpec::Dense { width, height, .. } = self.spec.head {
            if img.width() != width || img.height() != height {
                return Err(dimension(format!(
                    "dense head expects {width}x{height}, got {}x{}",
                    img.width(),
                    img.height()
                )));
            }
        }
        let side = self.spec.kernel_side;
        if side > img.width().min(img.height()) {
            return Err(dimension(format!("kernel side {side} exceeds image {}x{}", img.width(), img.height())));
        }
        Ok(())
    }

    pub fn forward(&self, img: &Image) -> Result<(Output, ForwardTape)> {
        self.check_input(img)?;
        let s = &self.spec;
        let (w, h) = (img.width(), img.height());
        let p = w * h;
        let padded = Padded::new(img, s.kernel_side / 2, s.boundary);
        let mut responses = Vec::with_capacity(s.kernels);
        for k in &self.kernels {
            let mut r = vec![0.0; p];
            padded.convolve_into(k, &mut r);
            responses.push(r);
        }
        let act = s.activation;
        let mut activations = Vec::with_capacity(s.channels());
        let mut smoothed = Vec::with_capacity(s.channels());
        for j in 0..s.kernels {
            let smoother = s.smoother.kernel()?;
            for i in 0..s.bins {
                let c = j * s.bins + i;
                let (b, sigma) = (self.bias[c], self.log_sigma[c].exp());
                let a: Vec<f64> = responses[j].iter().map(|&r| act.eval(b - r, sigma)).collect();
                let sm = match &smoother {
                    Some(wk) => Some(convolve(&Image::from_vec(w, h, a.clone())?, wk, s.boundary)?.into_vec()),
                    None => None,
                };
                activations.push(a);
                smoothed.push(sm);
            }
        }
        let channel = |c: usize| -> &[f64] { smoothed[c].as_deref().unwrap_or(&activations[c]) };
        let hw = &self.head.weights;
        // Per-kernel partial sums are combined in sorted order, so relabelling
        // kernels leaves the output bit-identical.
        let mut partial = vec![0.0; s.kernels];
        let output = match s.head {
            HeadSpec::Dense { outputs, .. } => {
                let cn = s.channels();
                let y = (0..outputs)
                    .map(|o| {
                        for (j, pj) in partial.iter_mut().enumerate() {
                            *pj = (j * s.bins..(j + 1) * s.bins)
                                .map(|c| {
                                    let a = &hw[(o * cn + c) * p..(o * cn + c + 1) * p];
                                    dot(a, channel(c))
                                })
                                .sum();
                        }
                        self.head.bias[o] + order_free_sum(&mut partial)
                    })
                    .collect();
                Output::Vector(y)
            }
            HeadSpec::OneByOne { pooled } => {
                let mut per_kernel = vec![vec![0.0; p]; s.kernels];
                for (c, &wc) in hw.iter().enumerate() {
                    for (zk, hk) in per_kernel[c / s.bins].iter_mut().zip(channel(c)) {
                        *zk += wc * hk;
                    }
                }
                let z: Vec<f64> = (0..p)
                    .map(|k| {
                        for (pj, zj) in partial.iter_mut().zip(&per_kernel) {
                            *pj = zj[k];
                        }
                        self.head.bias[0] + order_free_sum(&mut partial)
                    })
                    .collect();
                if pooled {
                    Output::Vector(vec![z.iter().sum::<f64>() / p as f64])
                } else {
                    Output::Map(Image::from_vec(w, h, z)?)
                }
            }
        };
        let tape = ForwardTape { input: img.clone(), padded, responses, activations, smoothed, output: output.clone() };
        Ok((output, tape))
    }

    pub fn predict(&self, img: &Image) -> Result<Output> {
        self.forward(img).map(|(o, _)| o)
    }

    /// Accumulates parameter gradients of `<upstream, output>` into `grads`
    /// and returns the input gradient when `want_input` is set.
    pub fn backward(
        &self,
        tape: &ForwardTape,
        upstream: &[f64],
        grads: &mut GradVector,
        want_input: bool,
    ) -> Result<Option<Image>> {
        let s = &self.spec;
        if upstream.len() != tape.output.len() {
            return Err(dimension(format!(
                "upstream gradient has {} entries, output has {}",
                upstream.len(),
                tape.output.len()
            )));
        }
        if grads.layout != self.layout() {
            return Err(dimension("gradient layout does not match this layer"));
        }
        if tape.responses.len() != s.kernels || tape.activations.len() != s.channels() {
            return Err(dimension("tape was produced by a different layer"));
        }
        let (w, h) = (tape.input.width(), tape.input.height());
        let p = w * h;
        let cn = s.channels();
        let hw = &self.head.weights;

        // head
        let mut d_channel = vec![vec![0.0; p]; cn];
        {
            let range = grads.layout.range(FieldGroup::HeadWeights).expect("head weights");
            let (dw, db) = {
                let (a, b) = grads.values.split_at_mut(range.end);
                (&mut a[range.start..], &mut b[..self.head.bias.len()])
            };
            match s.head {
                HeadSpec::Dense { outputs, .. } => {
                    for o in 0..outputs {
                        let g = upstream[o];
                        db[o] += g;
                        if g == 0.0 {
                            continue;
                        }
                        for c in 0..cn {
                            let off = (o * cn + c) * p;
                            for (d, &x) in dw[off..off + p].iter_mut().zip(tape.channel(c)) {
                                *d += g * x;
                            }
                            for (d, &a) in d_channel[c].iter_mut().zip(&hw[off..off + p]) {
                                *d += g * a;
                            }
                        }
                    }
                }
                HeadSpec::OneByOne { pooled } => {
                    let gz: Vec<f64> = if pooled { vec![upstream[0] / p as f64; p] } else { upstream.to_vec() };
                    db[0] += gz.iter().sum::<f64>();
                    for c in 0..cn {
                        let hc = tape.channel(c);
                        dw[c] += dot(&gz, hc);
                        for (d, g) in d_channel[c].iter_mut().zip(&gz) {
                            *d = hw[c] * g;
                        }
                    }
                }
            }
        }

        // smoother adjoint, then activation derivatives
        let smoother = s.smoother.kernel()?;
        let widths = grads.layout.range(FieldGroup::Widths);
        let mut d_response = vec![vec![0.0; p]; s.kernels];
        for j in 0..s.kernels {
            for i in 0..s.bins {
                let c = j * s.bins + i;
                let da = match &smoother {
                    Some(wk) => {
                        convolve_adjoint(&Image::from_vec(w, h, std::mem::take(&mut d_channel[c]))?, wk, s.boundary)?
                            .into_vec()
                    }
                    None => std::mem::take(&mut d_channel[c]),
                };
                let (b, sigma) = (self.bias[c], self.log_sigma[c].exp());
                let (mut db, mut dsigma) = (0.0, 0.0);
                let act = s.activation;
                let cells = d_response[j].iter_mut().zip(&da).zip(&tape.responses[j]).zip(&tape.activations[c]);
                for (((dr, &g), &r), &a) in cells {
                    let (dv, ds) = act.derivatives_from(b - r, sigma, a);
                    let gv = g * dv;
                    db += gv;
                    dsigma += g * ds;
                    *dr -= gv;
                }
                grads.group_mut(FieldGroup::Biases)[c] += db;
                if let Some(r) = &widths {
                    // chain through sigma = exp(log sigma)
                    grads.values[r.start + c] += dsigma * sigma;
                }
            }
        }

        // kernels and input
        let per = s.kernel_side * s.kernel_side;
        {
            let dk = grads.group_mut(FieldGroup::Kernels);
            for j in 0..s.kernels {
                tape.padded.kernel_gradient_into(&d_response[j], s.kernel_side, &mut dk[j * per..(j + 1) * per]);
            }
        }
        if !want_input {
            return Ok(None);
        }
        let mut d_input = vec![0.0; p];
        for j in 0..s.kernels {
            adjoint_into(&d_response[j], w, h, &self.kernels[j], s.boundary, &mut d_input);
        }
        Ok(Some(Image::from_vec(w, h, d_input)?))
    }

    /// Parameter and input gradients of `<upstream, output>`.
    pub fn gradients(&self, tape: &ForwardTape, upstream: &[f64]) -> Result<(GradVector, Image)> {
        let mut g = ParamVector::zeros(self.layout());
        let d_input = self.backward(tape, upstream, &mut g, true)?.expect("input gradient requested");
        Ok((g, d_input))
    }

    pub(crate) fn log_sigma_raw(&self) -> &[f64] {
        &self.log_sigma
    }

    pub(crate) fn from_raw(
        spec: LayerSpec,
        kernels: Vec<Kernel>,
        bias: Vec<f64>,
        log_sigma: Vec<f64>,
        head: Head,
    ) -> Result<Self> {
        let template = Self::zeroed(spec)?;
        if kernels.len() != spec.kernels
            || kernels.iter().any(|k| k.size() != spec.kernel_side)
            || bias.len() != spec.channels()
            || log_sigma.len() != spec.channels()
            || head.weights.len() != template.head.weights.len()
            || head.bias.len() != template.head.bias.len()
        {
            return Err(dimension("parameter sizes do not match the layer spec"));
        }
        Ok(Self { spec, kernels, bias, log_sigma, head })
    }
}
