use thiserror::Error;

use super::MetricParams;
use crate::drift::{drift_score, pseudo_labels, transferability_wasserstein, DriftError, LabelFreeInput, TrainConfig};
use crate::metrics::{
    energy_score, lda_separability, leep, logme, nce, softmax_rows, MatrixView, MetricError, MetricId, ScoreValue,
};
use crate::rng::mix_seed;
use crate::tensor_io::{Hub, Strategy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("MissingFeatures: model {model_id:?} has no features for {target:?}")]
    MissingFeatures { model_id: String, target: String },
    #[error("MissingLabels: {target:?} has no labels but the metric needs them")]
    MissingLabels { target: String },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Drift(#[from] DriftError),
}

impl ScoreError {
    pub fn is_input_error(&self) -> bool {
        match self {
            ScoreError::MissingFeatures { .. } | ScoreError::MissingLabels { .. } => true,
            ScoreError::Metric(e) => matches!(
                e,
                MetricError::DimensionMismatch(_)
                    | MetricError::EmptyInput
                    | MetricError::LengthMismatch { .. }
                    | MetricError::InvalidParameter(_)
                    | MetricError::NotAProbability { .. }
                    | MetricError::DegenerateLabels(_)
            ),
            ScoreError::Drift(e) => matches!(
                e,
                DriftError::EmptyInput
                    | DriftError::ShapeMismatch(_)
                    | DriftError::DimensionMismatch(_)
                    | DriftError::StructureMismatch(_)
                    | DriftError::InvalidConfig(_)
                    | DriftError::NotADriftMetric(_)
            ),
        }
    }
}

/// Scores one model on one target. Label-based metrics read the target
/// labels; the drift metrics never do. Under the `full` strategy a drift
/// metric uses the hub's before/after snapshots when the model has them and
/// falls back to the probe otherwise.
pub fn score_model(
    hub: &Hub,
    model_id: &str,
    target: &str,
    metric: MetricId,
    strategy: Strategy,
    params: &MetricParams,
    experiment_seed: u64,
) -> Result<ScoreValue, ScoreError> {
    let fs = hub
        .feature_set(model_id, target)
        .ok_or_else(|| ScoreError::MissingFeatures { model_id: model_id.to_string(), target: target.to_string() })?;
    let features = MatrixView::new(fs.features(), fs.n(), fs.dim())?;
    let logits = MatrixView::new(fs.logits(), fs.n(), fs.source_classes())?;

    if metric.is_drift() {
        if strategy == Strategy::Full {
            if let Some(pair) = hub.snapshots(model_id, target) {
                let value = drift_score(&pair.before, &pair.after, metric)?;
                return Ok(ScoreValue::new(metric, value, model_id, target, strategy)?);
            }
        }
        let cfg = TrainConfig {
            epochs: params.epochs,
            lr: params.lr,
            batch_size: params.batch_size,
            seed: mix_seed(experiment_seed, model_id, target),
            strategy: strategy.into(),
            shuffle: true,
        };
        let input = LabelFreeInput::new(fs, hub.head(model_id));
        return Ok(transferability_wasserstein(input, model_id, target, &cfg, metric)?);
    }

    let labels = || fs.labels().ok_or_else(|| ScoreError::MissingLabels { target: target.to_string() });
    let value = match metric {
        MetricId::LogMe => logme(features, labels()?, params.logme_config())?,
        MetricId::Leep => {
            let probs = softmax_rows(logits);
            leep(MatrixView::new(&probs, fs.n(), fs.source_classes())?, labels()?)?
        }
        MetricId::Nce => {
            let z = pseudo_labels(logits)?;
            nce(z.values(), labels()?)?
        }
        MetricId::Energy => energy_score(logits)?,
        MetricId::LdaSep => lda_separability(features, labels()?, params.lambda)?,
        MetricId::WassersteinDrift | MetricId::L1Drift | MetricId::L2Drift => unreachable!(),
    };
    Ok(ScoreValue::new(metric, value, model_id, target, strategy)?)
}
