//! Feature-based transferability scores. Every score is a finite real where
//! larger means "predicted to transfer better".

mod energy;
mod lda;
mod leep;
mod logme;
mod nce;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor_io::Strategy;

pub use energy::energy_score;
pub use lda::{lda_separability, DEFAULT_SHRINKAGE};
pub use leep::{leep, softmax_rows};
pub use logme::{logme, LogMeConfig};
pub use nce::nce;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("DegenerateLabels: {0}")]
    DegenerateLabels(String),
    #[error("DimensionMismatch: {0}")]
    DimensionMismatch(String),
    #[error("NotAProbability: row {row} is not on the probability simplex")]
    NotAProbability { row: usize },
    #[error("EmptyInput")]
    EmptyInput,
    #[error("LengthMismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("SingularCovariance: shared covariance is not positive definite (shrinkage {shrinkage})")]
    SingularCovariance { shrinkage: f64 },
    #[error("InvalidParameter: {0}")]
    InvalidParameter(String),
    #[error("NonFiniteScore: {0}")]
    NonFiniteScore(String),
}

/// Borrowed row-major `f32` matrix.
#[derive(Debug, Clone, Copy)]
pub struct MatrixView<'a> {
    data: &'a [f32],
    rows: usize,
    cols: usize,
}

impl<'a> MatrixView<'a> {
    pub fn new(data: &'a [f32], rows: usize, cols: usize) -> Result<Self, MetricError> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(MetricError::DimensionMismatch(format!(
                "{} values cannot form a [{rows} x {cols}] matrix",
                data.len()
            )));
        }
        Ok(Self { data, rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &'a [f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &'a [f32] {
        self.data
    }

    pub(crate) fn to_dmatrix(self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_iterator(self.rows, self.cols, self.data.iter().map(|&v| f64::from(v)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MetricId {
    LogMe,
    Leep,
    Nce,
    Energy,
    LdaSep,
    WassersteinDrift,
    L1Drift,
    L2Drift,
}

impl MetricId {
    pub const ALL: [MetricId; 8] = [
        MetricId::LogMe,
        MetricId::Leep,
        MetricId::Nce,
        MetricId::Energy,
        MetricId::LdaSep,
        MetricId::WassersteinDrift,
        MetricId::L1Drift,
        MetricId::L2Drift,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::LogMe => "logme",
            MetricId::Leep => "leep",
            MetricId::Nce => "nce",
            MetricId::Energy => "energy",
            MetricId::LdaSep => "ldasep",
            MetricId::WassersteinDrift => "wassersteindrift",
            MetricId::L1Drift => "l1drift",
            MetricId::L2Drift => "l2drift",
        }
    }

    /// Whether the metric reads target labels.
    pub fn needs_labels(self) -> bool {
        matches!(self, MetricId::LogMe | MetricId::Leep | MetricId::Nce | MetricId::LdaSep)
    }

    pub fn is_drift(self) -> bool {
        matches!(self, MetricId::WassersteinDrift | MetricId::L1Drift | MetricId::L2Drift)
    }

    pub fn valid_names() -> String {
        Self::ALL.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown metric {name:?}; valid metrics are: {valid}", name = .0, valid = MetricId::valid_names())]
pub struct ParseMetricError(pub String);

impl FromStr for MetricId {
    type Err = ParseMetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.iter().copied().find(|m| m.as_str() == s).ok_or_else(|| ParseMetricError(s.to_string()))
    }
}

impl TryFrom<String> for MetricId {
    type Error = ParseMetricError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<MetricId> for String {
    fn from(m: MetricId) -> Self {
        m.as_str().to_string()
    }
}

/// One model's score on one target under one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreValue {
    pub metric: MetricId,
    pub value: f64,
    pub model_id: String,
    pub target_dataset: String,
    pub strategy: Strategy,
}

impl ScoreValue {
    pub fn new(
        metric: MetricId,
        value: f64,
        model_id: impl Into<String>,
        target_dataset: impl Into<String>,
        strategy: Strategy,
    ) -> Result<Self, MetricError> {
        let model_id = model_id.into();
        if !value.is_finite() {
            return Err(MetricError::NonFiniteScore(format!("{metric} for {model_id} is {value}")));
        }
        Ok(Self { metric, value, model_id, target_dataset: target_dataset.into(), strategy })
    }
}

/// Distinct labels in ascending order.
pub(crate) fn distinct_labels(labels: &[i64]) -> Vec<i64> {
    let mut v = labels.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_names_roundtrip() {
        for m in MetricId::ALL {
            assert_eq!(m.as_str().parse::<MetricId>().unwrap(), m);
            assert_eq!(m.to_string(), m.as_str().to_lowercase());
        }
        let err = "foo".parse::<MetricId>().unwrap_err();
        assert!(err.to_string().contains("wassersteindrift"));
    }

    #[test]
    fn metric_serde_uses_lowercase() {
        let json = serde_json::to_string(&vec![MetricId::LogMe, MetricId::L2Drift]).unwrap();
        assert_eq!(json, r#"["logme","l2drift"]"#);
        assert!(serde_json::from_str::<MetricId>(r#""LogME""#).is_err());
    }

    #[test]
    fn score_value_rejects_nan() {
        assert!(ScoreValue::new(MetricId::Leep, f64::NAN, "m", "t", Strategy::Head).is_err());
    }

    #[test]
    fn matrix_view_checks_length() {
        assert!(MatrixView::new(&[0.0; 6], 2, 3).is_ok());
        assert!(MatrixView::new(&[0.0; 5], 2, 3).is_err());
    }
}
