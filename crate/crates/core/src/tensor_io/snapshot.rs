use std::collections::HashSet;

use thiserror::Error;

use super::blob::TensorBlob;

#[derive(Debug, Error, PartialEq)]
pub enum SnapshotError {
    #[error("snapshot has no parameters")]
    Empty,
    #[error("segment name {0:?} is repeated")]
    DuplicateSegment(String),
    #[error("segment {0:?} must hold f32 values")]
    WrongDtype(String),
    #[error("segment {name:?} holds a non-finite value at index {index}")]
    NonFinite { name: String, index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub name: String,
    pub values: Vec<f32>,
}

/// Flattened trainable parameters, kept as named segments in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSnapshot {
    segments: Vec<Segment>,
    total_len: usize,
}

impl WeightSnapshot {
    pub fn new(segments: Vec<Segment>) -> Result<Self, SnapshotError> {
        let mut seen = HashSet::new();
        for seg in &segments {
            if !seen.insert(seg.name.as_str()) {
                return Err(SnapshotError::DuplicateSegment(seg.name.clone()));
            }
            if let Some(index) = seg.values.iter().position(|v| !v.is_finite()) {
                return Err(SnapshotError::NonFinite { name: seg.name.clone(), index });
            }
        }
        let total_len = segments.iter().map(|s| s.values.len()).sum();
        if total_len == 0 {
            return Err(SnapshotError::Empty);
        }
        Ok(Self { segments, total_len })
    }

    /// Single-segment snapshot holding every value of `blob`, flattened.
    pub fn from_blob(name: &str, blob: &TensorBlob) -> Result<Self, SnapshotError> {
        let values = blob.as_f32().ok_or_else(|| SnapshotError::WrongDtype(name.to_string()))?;
        Self::new(vec![Segment { name: name.to_string(), values: values.to_vec() }])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_len(&self) -> usize {
        self.total_len
    }

    pub fn values(&self) -> impl Iterator<Item = f32> + '_ {
        self.segments.iter().flat_map(|s| s.values.iter().copied())
    }

    pub fn flat(&self) -> Vec<f32> {
        self.values().collect()
    }

    /// Same segment names and lengths, in the same order.
    pub fn same_structure(&self, other: &Self) -> bool {
        self.segments.len() == other.segments.len()
            && self
                .segments
                .iter()
                .zip(&other.segments)
                .all(|(a, b)| a.name == b.name && a.values.len() == b.values.len())
    }

    pub fn to_blob(&self) -> TensorBlob {
        TensorBlob::from_f32(vec![self.total_len], self.flat()).expect("finite by construction")
    }

    pub fn bit_eq(&self, other: &Self) -> bool {
        self.same_structure(other) && self.values().zip(other.values()).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}
