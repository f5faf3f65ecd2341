//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! task = "perimeter_classification"
//!
//! [model]
//! kind = "lon"            # "lon" or "cnn"
//! kernels = 2
//! bins = 2                # lon only
//! activation = "relu"     # cnn only: sigmoid, relu, integrated_bell
//! kernel_side = 3
//! head = "dense"          # dense, one_by_one, pooled
//! sigma_learnable = true
//! boundary = "reflect"    # reflect, zero_pad
//!
//! [train]
//! epochs = 30
//! batch_size = 32
//! lrs = [1e-3, 5e-4]
//!
//! [dataset]
//! generator = "ellipses"  # blobs, ellipses, digits, idx
//! train_count = 1500
//! val_count = 150
//! test_count = 1000
//! noise_sigma = 0.0
//! constraint = { kind = "constant_area", value = 2000.0 }
//! # idx_path = "train-images-idx3-ubyte"
//! ```
//!
//! Unknown keys are rejected. The config hash is the SHA-256 of the
//! canonical re-serialisation, so formatting, comments and key order in the
//! source file do not affect it.

use std::path::Path;

use lon_core::datasets::EllipseConstraint;
use lon_core::layers::{Activation, HeadSpec, LayerSpec};
use lon_core::BoundaryMode;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Grad2Regression,
    AreaRegression,
    PerimeterRegression,
    AreaClassification,
    PerimeterClassification,
}

impl Task {
    pub fn is_classification(self) -> bool {
        matches!(self, Task::AreaClassification | Task::PerimeterClassification)
    }

    pub fn is_shape_task(self) -> bool {
        self != Task::Grad2Regression
    }

    pub fn outputs(self) -> usize {
        if self.is_classification() {
            3
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lon,
    Cnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationName {
    Sigmoid,
    Relu,
    IntegratedBell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Dense,
    OneByOne,
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Reflect,
    ZeroPad,
}

fn default_side() -> usize {
    3
}

fn default_true() -> bool {
    true
}

fn default_head() -> HeadKind {
    HeadKind::Dense
}

fn default_boundary() -> Boundary {
    Boundary::Reflect
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub kernels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<ActivationName>,
    #[serde(default = "default_side")]
    pub kernel_side: usize,
    #[serde(default = "default_head")]
    pub head: HeadKind,
    #[serde(default = "default_true")]
    pub sigma_learnable: bool,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lrs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Blobs,
    Ellipses,
    Digits,
    Idx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    ConstantArea,
    ConstantPerimeter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    pub kind: ConstraintKind,
    pub value: f64,
}

impl ConstraintConfig {
    pub fn to_constraint(self) -> EllipseConstraint {
        match self.kind {
            ConstraintKind::ConstantArea => EllipseConstraint::ConstantArea(self.value),
            ConstraintKind::ConstantPerimeter => EllipseConstraint::ConstantPerimeter(self.value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub generator: Generator,
    pub train_count: usize,
    pub val_count: usize,
    pub test_count: usize,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<ConstraintConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idx_path: Option<String>,
}

impl DatasetConfig {
    pub fn total(&self) -> usize {
        self.train_count + self.val_count + self.test_count
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub task: Task,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub dataset: DatasetConfig,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        let d = &self.dataset;
        if m.kernels == 0 || m.kernel_side == 0 || m.kernel_side.is_multiple_of(2) {
            return Err(invalid("model needs at least one kernel and an odd kernel side"));
        }
        match m.kind {
            ModelKind::Lon => {
                if m.bins.unwrap_or(0) == 0 {
                    return Err(invalid("a lon model needs bins >= 1"));
                }
                if m.activation.is_some() {
                    return Err(invalid("a lon model always uses the bell activation"));
                }
            }
            ModelKind::Cnn => {
                if m.activation.is_none() {
                    return Err(invalid("a cnn model needs an activation"));
                }
                if m.bins.is_some_and(|b| b != 1) {
                    return Err(invalid("a cnn model has exactly one bin"));
                }
            }
        }
        if self.train.batch_size == 0 {
            return Err(invalid("batch_size must be positive"));
        }
        if self.train.lrs.is_empty() || self.train.lrs.iter().any(|lr| !(*lr >= 0.0) || !lr.is_finite()) {
            return Err(invalid("lrs must be a non-empty list of non-negative numbers"));
        }
        if d.train_count == 0 || d.val_count == 0 || d.test_count == 0 {
            return Err(invalid("dataset counts must all be positive"));
        }
        if !(d.noise_sigma >= 0.0) || !d.noise_sigma.is_finite() {
            return Err(invalid("noise_sigma must be non-negative"));
        }
        match self.task {
            Task::Grad2Regression => {
                if m.kernel_side != 3 || m.head != HeadKind::OneByOne {
                    return Err(invalid("the grad2 task uses 3x3 kernels and a one_by_one head"));
                }
                if !matches!(d.generator, Generator::Digits | Generator::Idx) {
                    return Err(invalid("the grad2 task needs the digits or idx generator"));
                }
                if d.generator == Generator::Idx && d.idx_path.is_none() {
                    return Err(invalid("the idx generator needs idx_path"));
                }
            }
            t => {
                if !matches!(d.generator, Generator::Blobs | Generator::Ellipses) {
                    return Err(invalid("shape tasks need the blobs or ellipses generator"));
                }
                if d.generator == Generator::Ellipses && d.constraint.is_none() {
                    return Err(invalid("the ellipses generator needs a constraint"));
                }
                if t.is_classification() && m.head != HeadKind::Dense {
                    return Err(invalid("classification needs the dense head with three outputs"));
                }
                if m.head == HeadKind::OneByOne {
                    return Err(invalid("scalar shape tasks need the dense or pooled head"));
                }
                if d.total() < 3 && t.is_classification() {
                    return Err(invalid("classification needs at least 3 samples"));
                }
            }
        }
        Ok(())
    }

    /// Canonical TOML text: fields in declaration order, defaults filled in.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn hash(&self) -> String {
        crate::artifacts::hash_text(&self.canonical())
    }

    pub fn activation(&self) -> Activation {
        match (self.model.kind, self.model.activation) {
            (ModelKind::Lon, _) => Activation::GaussBell,
            (ModelKind::Cnn, Some(ActivationName::Sigmoid)) => Activation::LogisticSigmoid,
            (ModelKind::Cnn, Some(ActivationName::Relu)) => Activation::Relu,
            (ModelKind::Cnn, Some(ActivationName::IntegratedBell)) => Activation::IntegratedBell,
            (ModelKind::Cnn, None) => unreachable!("validated"),
        }
    }

    /// Layer architecture for inputs of `width x height`.
    pub fn layer_spec(&self, width: usize, height: usize) -> LayerSpec {
        let m = &self.model;
        let head = match m.head {
            HeadKind::Dense => HeadSpec::Dense { outputs: self.task.outputs(), width, height },
            HeadKind::OneByOne => HeadSpec::OneByOne { pooled: false },
            HeadKind::Pooled => HeadSpec::OneByOne { pooled: true },
        };
        let mut spec = match m.kind {
            ModelKind::Lon => LayerSpec::lon(m.kernels, m.bins.unwrap_or(1), m.kernel_side, head),
            ModelKind::Cnn => LayerSpec::cnn(self.activation(), m.kernels, m.kernel_side, head),
        };
        spec.boundary = match m.boundary {
            Boundary::Reflect => BoundaryMode::Reflect,
            Boundary::ZeroPad => BoundaryMode::ZeroPad,
        };
        spec.sigma_learnable = m.sigma_learnable;
        spec
    }

    /// Short model label such as `lon-2x8` or `cnn-2-relu`.
    pub fn model_label(&self) -> String {
        match self.model.kind {
            ModelKind::Lon => format!("lon-{}x{}", self.model.kernels, self.model.bins.unwrap_or(1)),
            ModelKind::Cnn => format!("cnn-{}-{}", self.model.kernels, self.activation().name()),
        }
    }
}
