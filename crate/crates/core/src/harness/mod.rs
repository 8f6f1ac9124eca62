//! Measures how well a score ranks a hub against ground-truth accuracies,
//! across source datasets, complexity windows and fine-tuning strategies.

mod complexity;
mod kendall;
mod run;
mod scoring;
mod spec;
mod table;

use thiserror::Error;

use crate::metrics::MetricId;
use crate::tensor_io::Strategy;

pub use complexity::complexity_subset;
pub use kendall::{kendall_tau, rank_weights, weighted_kendall_tau, RankingPair};
pub use run::run_experiment;
pub use scoring::{score_model, ScoreError};
pub use spec::{ComplexitySpec, ExperimentSpec, MetricParams};
pub use table::{
    AbsentCell, AggregateRow, Cell, CellEntry, ResultTable, SigmaRow, SourceMeanRow, AGGREGATES_HEADER, CELLS_HEADER,
    SCORES_HEADER, SIGMA_HEADER,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("TooFewModels: need at least 2 models, got {0}")]
    TooFewModels(usize),
    #[error("LengthMismatch: {ground} ground-truth values vs {scores} scores")]
    LengthMismatch { ground: usize, scores: usize },
    #[error("NonFinite: ranking input contains NaN")]
    NonFinite,
    #[error("WindowTooLarge: window {window} over {models} models")]
    WindowTooLarge { window: usize, models: usize },
    #[error("BadLevel: level {level} outside 1..={levels}")]
    BadLevel { level: usize, levels: usize },
    #[error("InvalidSpec: {0}")]
    InvalidSpec(String),
    #[error("MissingGroundTruth: no accuracy for model {model_id:?} on {target:?} ({strategy})")]
    MissingGroundTruth { model_id: String, target: String, strategy: Strategy },
    #[error("EmptyTable: no cells to aggregate")]
    EmptyTable,
    #[error("{metric} for model {model_id:?} on {target:?}: {source}")]
    Score { model_id: String, target: String, metric: MetricId, source: ScoreError },
    #[error("BadTable: {0}")]
    BadTable(String),
}

impl EvalError {
    /// True when the failure comes from the inputs rather than from a
    /// computation that went wrong on valid inputs.
    pub fn is_input_error(&self) -> bool {
        match self {
            EvalError::Score { source, .. } => source.is_input_error(),
            _ => true,
        }
    }
}
