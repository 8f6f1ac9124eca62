use super::probe::{finetune_probe, init_probe, pseudo_labels, TrainConfig};
use super::{drift_score, DriftError};
use crate::metrics::{MatrixView, MetricId, ScoreValue};
use crate::tensor_io::{FeatureSet, HeadWeights};

/// The parts of a feature set the drift score may see. There is no field for
/// target labels, so nothing downstream can read them.
#[derive(Debug, Clone, Copy)]
pub struct LabelFreeInput<'a> {
    pub features: MatrixView<'a>,
    pub logits: MatrixView<'a>,
    pub head: Option<&'a HeadWeights>,
}

impl<'a> LabelFreeInput<'a> {
    pub fn new(fs: &'a FeatureSet, head: Option<&'a HeadWeights>) -> Self {
        Self {
            features: MatrixView::new(fs.features(), fs.n(), fs.dim()).expect("validated feature set"),
            logits: MatrixView::new(fs.logits(), fs.n(), fs.source_classes()).expect("validated feature set"),
            head,
        }
    }
}

/// Pseudo-label, fine-tune a probe briefly, and score the negated drift.
pub fn transferability_wasserstein(
    input: LabelFreeInput<'_>,
    model_id: &str,
    target: &str,
    cfg: &TrainConfig,
    metric: MetricId,
) -> Result<ScoreValue, DriftError> {
    if !metric.is_drift() {
        return Err(DriftError::NotADriftMetric(metric));
    }
    if input.features.rows() != input.logits.rows() {
        return Err(DriftError::DimensionMismatch(format!(
            "{} feature rows vs {} logit rows",
            input.features.rows(),
            input.logits.rows()
        )));
    }
    let pseudo = pseudo_labels(input.logits)?;
    let probe0 = init_probe(input.head, cfg.strategy, input.features.cols(), input.logits.cols())?;
    let outcome = finetune_probe(input.features, &pseudo, &probe0, cfg)?;
    let value = drift_score(&outcome.theta0, &outcome.theta1, metric)?;
    ScoreValue::new(metric, value, model_id, target, cfg.strategy.into())
        .map_err(|_| DriftError::NonFiniteLoss { epoch: cfg.epochs.saturating_sub(1) })
}
