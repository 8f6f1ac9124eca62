//! Label-free transferability from parameter drift.
//!
//! The model's own argmax predictions on the target set become pseudo-labels,
//! a probe initialised from the model's classifier is trained on them for a
//! couple of epochs, and the score is the negated distance between the
//! parameters before and after that short run.

mod distance;
mod pipeline;
mod probe;
mod wasserstein;

use thiserror::Error;

use crate::metrics::MetricId;

pub use distance::{drift_score, drift_score_with_mode, elementwise_distance, DriftMode, Norm};
pub use pipeline::{transferability_wasserstein, LabelFreeInput};
pub use probe::{
    finetune_probe, init_probe, pseudo_labels, FineTuneOutcome, ProbeParams, ProbeStrategy, PseudoLabels, TrainConfig,
};
pub use wasserstein::{wasserstein_1d, wasserstein_per_segment, EmpiricalDistribution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriftError {
    #[error("EmptyInput")]
    EmptyInput,
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("DimensionMismatch: {0}")]
    DimensionMismatch(String),
    #[error("NonFiniteLoss: training diverged in epoch {epoch}; lower the learning rate")]
    NonFiniteLoss { epoch: usize },
    #[error("EmptyDistribution")]
    EmptyDistribution,
    #[error("NonFiniteSample: sample {index} is NaN or infinite")]
    NonFiniteSample { index: usize },
    #[error("StructureMismatch: {0}")]
    StructureMismatch(String),
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("{0} is not a drift metric")]
    NotADriftMetric(MetricId),
}
