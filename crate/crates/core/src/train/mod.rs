//! Losses, the Adam optimiser, the training loop and gradient checking.

mod adam;
pub mod gradcheck;
mod loss;
mod trainer;

pub use adam::AdamState;
pub use gradcheck::{gradcheck, gradcheck_with, run_suite, standard_suite, GradcheckReport, GroupError, SuiteCase};
pub use loss::{argmax, loss, LossKind, Target};
pub use trainer::{evaluate, train, Divergence, Example, Label, MetricRow, Metrics, Split, TrainConfig, TrainOutcome};
