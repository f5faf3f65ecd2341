//! Central finite differences against the analytic backward pass.

use rand::Rng;

use super::{loss, Label, LossKind};
use crate::error::{argument, Result};
use crate::image::{BoundaryMode, Image};
use crate::layers::{Activation, GradVector, HeadSpec, Layer, LayerSpec, Smoother};
use crate::rng::{stream_rng, Stream};

/// Relative errors use `max(|analytic|, |numeric|, REL_FLOOR)` as the
/// denominator so vanishing gradients compare absolutely.
pub const REL_FLOOR: f64 = 1e-6;

/// Analytic gradient provider: parameter and input gradients of the loss.
pub type AnalyticFn<'a> = dyn Fn(&Layer, &Image, &Label, LossKind) -> Result<(GradVector, Image)> + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    /// `K`, `b`, `sigma`, `A`, `A_bias` or `input`.
    pub group: String,
    pub max_rel_error: f64,
    pub entries: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub groups: Vec<GroupError>,
    pub tolerance: f64,
}

impl GradcheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.groups.iter().all(|g| g.max_rel_error < self.tolerance)
    }
}

fn objective(layer: &Layer, img: &Image, label: &Label, kind: LossKind) -> Result<f64> {
    let out = layer.predict(img)?;
    Ok(loss(kind, out.values(), label.target())?.0)
}

/// The layer's own backward pass.
pub fn analytic_gradients(layer: &Layer, img: &Image, label: &Label, kind: LossKind) -> Result<(GradVector, Image)> {
    let (out, tape) = layer.forward(img)?;
    let (_, g) = loss(kind, out.values(), label.target())?;
    layer.gradients(&tape, &g)
}

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

pub fn gradcheck(
    layer: &Layer,
    img: &Image,
    label: &Label,
    kind: LossKind,
    step: f64,
    tolerance: f64,
) -> Result<GradcheckReport> {
    gradcheck_with(layer, img, label, kind, step, tolerance, &analytic_gradients)
}

/// As [`gradcheck`], with the analytic side supplied by `analytic`.
pub fn gradcheck_with(
    layer: &Layer,
    img: &Image,
    label: &Label,
    kind: LossKind,
    step: f64,
    tolerance: f64,
    analytic: &AnalyticFn<'_>,
) -> Result<GradcheckReport> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(argument(format!("finite-difference step must be positive, got {step}")));
    }
    let (grads, d_input) = analytic(layer, img, label, kind)?;
    let base = layer.params();
    if grads.layout != base.layout {
        return Err(argument("analytic gradient layout differs from the layer"));
    }
    let mut probe = layer.clone();
    let mut groups = Vec::new();
    for (group, range) in base.layout.groups() {
        let mut worst: f64 = 0.0;
        for t in range.clone() {
            let mut p = base.clone();
            p.values[t] = base.values[t] + step;
            probe.set_params(&p)?;
            let up = objective(&probe, img, label, kind)?;
            p.values[t] = base.values[t] - step;
            probe.set_params(&p)?;
            let down = objective(&probe, img, label, kind)?;
            worst = worst.max(rel_error(grads.values[t], (up - down) / (2.0 * step)));
        }
        groups.push(GroupError { group: group.label().to_string(), max_rel_error: worst, entries: range.len() });
    }
    let mut worst: f64 = 0.0;
    let mut shifted = img.clone();
    for k in 0..img.len() {
        shifted.data_mut()[k] = img.data()[k] + step;
        let up = objective(layer, &shifted, label, kind)?;
        shifted.data_mut()[k] = img.data()[k] - step;
        let down = objective(layer, &shifted, label, kind)?;
        shifted.data_mut()[k] = img.data()[k];
        worst = worst.max(rel_error(d_input.data()[k], (up - down) / (2.0 * step)));
    }
    groups.push(GroupError { group: "input".into(), max_rel_error: worst, entries: img.len() });
    Ok(GradcheckReport { groups, tolerance })
}

/// One architecture instance of the standard gradient-check suite.
#[derive(Debug, Clone)]
pub struct SuiteCase {
    pub name: String,
    pub layer: Layer,
    pub image: Image,
    pub label: Label,
    pub loss: LossKind,
}

/// Pre-activations closer than this to a ReLU kink would make central
/// differences straddle it.
fn clear_of_kinks(layer: &Layer, img: &Image, margin: f64) -> bool {
    let Ok((_, tape)) = layer.forward(img) else { return false };
    (0..layer.spec().kernels).all(|j| tape.response(j).iter().all(|r| (layer.bias(j, 0) - r).abs() > margin))
}

/// Every activation under both head forms at 5x5, plus a Gaussian smoother
/// and a zero-padded variant of the bell layer. Dense heads use three-class
/// cross-entropy, 1x1 heads pixelwise regression.
pub fn standard_suite(seed: u64, step: f64) -> Result<Vec<SuiteCase>> {
    let side = 5;
    let mut rng = stream_rng(seed, Stream::Data, 0);
    let image = Image::from_fn(side, side, |_, _| rng.gen_range(0.0..1.0))?;
    let target = Image::from_fn(side, side, |_, _| rng.gen_range(-1.0..1.0))?;
    let mut variants: Vec<(String, LayerSpec)> = Vec::new();
    let archs = [
        ("lon-bell", Activation::GaussBell, 2),
        ("cnn-sigmoid", Activation::LogisticSigmoid, 1),
        ("cnn-relu", Activation::Relu, 1),
        ("cnn-integrated-bell", Activation::IntegratedBell, 1),
    ];
    for (name, act, bins) in archs {
        for (head_name, head) in [
            ("dense", HeadSpec::Dense { outputs: 3, width: side, height: side }),
            ("1x1", HeadSpec::OneByOne { pooled: false }),
        ] {
            let mut spec = LayerSpec::lon(2, bins, 3, head);
            spec.activation = act;
            variants.push((format!("{name}/{head_name}"), spec));
        }
    }
    let mut smoothed = LayerSpec::lon(2, 2, 3, HeadSpec::OneByOne { pooled: false });
    smoothed.smoother = Smoother::Gaussian { sigma: 1.0, radius: 1 };
    variants.push(("lon-bell-gaussian-w/1x1".into(), smoothed));
    let mut zero_pad = LayerSpec::lon(2, 2, 3, HeadSpec::Dense { outputs: 3, width: side, height: side });
    zero_pad.boundary = BoundaryMode::ZeroPad;
    variants.push(("lon-bell-zero-pad/dense".into(), zero_pad));

    variants
        .into_iter()
        .enumerate()
        .map(|(v, (name, spec))| {
            let (label, loss) = match spec.head {
                HeadSpec::Dense { .. } => (Label::Class(v % 3), LossKind::SoftmaxCrossEntropy),
                HeadSpec::OneByOne { .. } => (Label::Map(target.clone()), LossKind::PixelwiseMse),
            };
            let mut attempt = 0u64;
            let layer = loop {
                let layer = Layer::initialise(
                    spec,
                    seed.wrapping_add(1000 * v as u64 + attempt),
                    std::slice::from_ref(&image),
                )?;
                if spec.activation != Activation::Relu || clear_of_kinks(&layer, &image, 10.0 * step) {
                    break layer;
                }
                attempt += 1;
            };
            Ok(SuiteCase { name, layer, image: image.clone(), label, loss })
        })
        .collect()
}

/// Checks every case of the standard suite.
pub fn run_suite(seed: u64, step: f64, tolerance: f64) -> Result<Vec<(String, GradcheckReport)>> {
    standard_suite(seed, step)?
        .into_iter()
        .map(|c| Ok((c.name, gradcheck(&c.layer, &c.image, &c.label, c.loss, step, tolerance)?)))
        .collect()
}
