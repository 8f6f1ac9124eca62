use super::blob::{Dtype, TensorBlob};
use super::HubError;

/// Features, source-head logits and (optionally) target labels of one model
/// on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    features: TensorBlob,
    logits: TensorBlob,
    labels: Option<TensorBlob>,
}

fn cross(msg: String) -> HubError {
    HubError::CrossValidation(msg)
}

impl FeatureSet {
    pub fn new(features: TensorBlob, logits: TensorBlob, labels: Option<TensorBlob>) -> Result<Self, HubError> {
        let (n, d) = features
            .matrix_dims()
            .filter(|_| features.dtype() == Dtype::F32)
            .ok_or_else(|| cross(format!("features must be a 2-D f32 matrix, got shape {:?}", features.shape())))?;
        let (n_logits, c) = logits
            .matrix_dims()
            .filter(|_| logits.dtype() == Dtype::F32)
            .ok_or_else(|| cross(format!("logits must be a 2-D f32 matrix, got shape {:?}", logits.shape())))?;
        if n == 0 || d == 0 {
            return Err(cross(format!("features shape [{n} x {d}] is empty")));
        }
        if c < 2 {
            return Err(cross(format!("logits need at least 2 source classes, got {c}")));
        }
        if n_logits != n {
            return Err(cross(format!("features have {n} rows but logits have {n_logits}")));
        }
        if let Some(labels) = &labels {
            let values = labels
                .as_i64()
                .filter(|_| labels.shape().len() == 1)
                .ok_or_else(|| cross(format!("labels must be a 1-D i64 vector, got shape {:?}", labels.shape())))?;
            if values.len() != n {
                return Err(cross(format!("labels have length {} but features have {n} rows", values.len())));
            }
            if let Some(bad) = values.iter().find(|&&v| v < 0) {
                return Err(cross(format!("label {bad} is negative")));
            }
        }
        Ok(Self { features, logits, labels })
    }

    pub fn n(&self) -> usize {
        self.features.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.features.shape()[1]
    }

    pub fn source_classes(&self) -> usize {
        self.logits.shape()[1]
    }

    pub fn features(&self) -> &[f32] {
        self.features.as_f32().expect("validated f32")
    }

    pub fn logits(&self) -> &[f32] {
        self.logits.as_f32().expect("validated f32")
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_ref().map(|l| l.as_i64().expect("validated i64"))
    }

    pub fn features_blob(&self) -> &TensorBlob {
        &self.features
    }

    pub fn logits_blob(&self) -> &TensorBlob {
        &self.logits
    }

    pub fn labels_blob(&self) -> Option<&TensorBlob> {
        self.labels.as_ref()
    }

    pub fn without_labels(&self) -> Self {
        Self { features: self.features.clone(), logits: self.logits.clone(), labels: None }
    }
}

/// Source classifier head: weight `[C_s x D]` and optional bias `[C_s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadWeights {
    pub weight: TensorBlob,
    pub bias: Option<TensorBlob>,
}

impl HeadWeights {
    pub fn new(weight: TensorBlob, bias: Option<TensorBlob>) -> Result<Self, HubError> {
        let (c, _) = weight
            .matrix_dims()
            .filter(|_| weight.dtype() == Dtype::F32)
            .ok_or_else(|| cross(format!("head weights must be a 2-D f32 matrix, got shape {:?}", weight.shape())))?;
        if let Some(b) = &bias {
            if b.dtype() != Dtype::F32 || b.shape() != [c] {
                return Err(cross(format!("head bias must be f32 of shape [{c}], got {:?}", b.shape())));
            }
        }
        Ok(Self { weight, bias })
    }

    pub fn classes(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.weight.shape()[1]
    }
}
