use rand::seq::SliceRandom;

use super::{loss, AdamState, LossKind, Target};
use crate::error::{argument, Error, Result};
use crate::image::Image;
use crate::layers::{Layer, ParamVector};
use crate::rng::{stream_rng, Stream};
use crate::train::loss::argmax;

/// Supervision for one input.
#[derive(Debug, Clone, PartialEq)]
pub enum Label {
    Map(Image),
    Values(Vec<f64>),
    Class(usize),
}

impl Label {
    pub fn target(&self) -> Target<'_> {
        match self {
            Label::Map(img) => Target::Values(img.data()),
            Label::Values(v) => Target::Values(v),
            Label::Class(c) => Target::Class(*c),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: Image,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub loss: LossKind,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub loss: f64,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub epoch: usize,
    pub split: Split,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub epoch: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Final layer, or the last layer that finished an epoch with finite
    /// loss when training diverged.
    pub layer: Layer,
    pub rows: Vec<MetricRow>,
    pub diverged: Option<Divergence>,
}

/// Mean loss, and accuracy for classification, over `examples`.
pub fn evaluate(layer: &Layer, examples: &[Example], kind: LossKind) -> Result<Metrics> {
    if examples.is_empty() {
        return Err(argument("cannot evaluate on an empty set"));
    }
    let mut total = 0.0;
    let mut correct = 0usize;
    for ex in examples {
        let out = layer.predict(&ex.input)?;
        total += loss(kind, out.values(), ex.label.target())?.0;
        if let Label::Class(c) = ex.label {
            correct += (argmax(out.values()) == c) as usize;
        }
    }
    let n = examples.len() as f64;
    Ok(Metrics { loss: total / n, accuracy: kind.is_classification().then(|| correct as f64 / n) })
}

/// Mini-batch Adam. Shuffling and initialisation draw from separate streams
/// of `cfg.seed`, so runs are reproducible bit for bit. Batches larger than
/// the training set fall back to full-batch steps.
///
/// Rows: epoch 0 evaluates the initial layer on both splits; each later
/// epoch reports the running mean of the batch losses on the training split
/// and a fresh evaluation on the validation split (when non-empty).
pub fn train(mut layer: Layer, train: &[Example], val: &[Example], cfg: &TrainConfig) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(argument("training set is empty"));
    }
    if cfg.batch_size == 0 {
        return Err(argument("batch size must be positive"));
    }
    let mut rows = vec![MetricRow { epoch: 0, split: Split::Train, metrics: evaluate(&layer, train, cfg.loss)? }];
    if !val.is_empty() {
        rows.push(MetricRow { epoch: 0, split: Split::Val, metrics: evaluate(&layer, val, cfg.loss)? });
    }
    let mut params = layer.params();
    let mut adam = AdamState::new(params.values.len(), cfg.lr);
    let mut grads = ParamVector::zeros(params.layout.clone());
    let mut last_good = layer.clone();
    let batch = cfg.batch_size.min(train.len());
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut stream_rng(cfg.seed, Stream::Shuffle, epoch as u64));
        let (mut total, mut correct) = (0.0, 0usize);
        let step = order.chunks(batch).try_for_each(|idx| -> Result<()> {
            grads.values.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / idx.len() as f64;
            for &i in idx {
                let ex = &train[i];
                let (out, tape) = layer.forward(&ex.input)?;
                let (value, mut g) = loss(cfg.loss, out.values(), ex.label.target())?;
                if !value.is_finite() {
                    return Err(Error::Numeric(format!("loss became {value}")));
                }
                total += value;
                if let Label::Class(c) = ex.label {
                    correct += (argmax(out.values()) == c) as usize;
                }
                g.iter_mut().for_each(|v| *v *= scale);
                layer.backward(&tape, &g, &mut grads, false)?;
            }
            adam.step(&mut params.values, &grads.values)?;
            layer.set_params(&params)
        });
        match step {
            Ok(()) => {}
            Err(Error::Numeric(message)) => {
                return Ok(TrainOutcome { layer: last_good, rows, diverged: Some(Divergence { epoch, message }) });
            }
            Err(e) => return Err(e),
        }
        let n = train.len() as f64;
        let accuracy = cfg.loss.is_classification().then(|| correct as f64 / n);
        rows.push(MetricRow { epoch, split: Split::Train, metrics: Metrics { loss: total / n, accuracy } });
        if !val.is_empty() {
            let m = evaluate(&layer, val, cfg.loss)?;
            if !m.loss.is_finite() {
                let message = format!("validation loss became {}", m.loss);
                return Ok(TrainOutcome { layer: last_good, rows, diverged: Some(Divergence { epoch, message }) });
            }
            rows.push(MetricRow { epoch, split: Split::Val, metrics: m });
        }
        last_good = layer.clone();
    }
    Ok(TrainOutcome { layer, rows, diverged: None })
}
