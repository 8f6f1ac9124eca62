//! Interchange I/O: the tensor container, feature sets, weight snapshots,
//! hub manifests and ground-truth tables. Everything is validated on load.

mod blob;
mod feature;
mod ground_truth;
mod hub;
pub mod npy;
mod snapshot;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use blob::{Dtype, TensorBlob, TensorData};
pub use feature::{FeatureSet, HeadWeights};
pub use ground_truth::{load_ground_truth, GroundTruthTable, GROUND_TRUTH_HEADER};
pub use hub::{load_hub, DatasetRecord, Hub, HubManifest, ModelRecord, SnapshotPair, SnapshotPaths};
pub use npy::{read_tensor, write_tensor};
pub use snapshot::{Segment, SnapshotError, WeightSnapshot};

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("BadMagic: missing \\x93NUMPY signature")]
    BadMagic,
    #[error("BadHeader: {0}")]
    BadHeader(String),
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("NonFinite: value at flat index {index} is NaN or infinite")]
    NonFinite { index: usize },
    #[error("UnsupportedDtype: {0:?} (only '<f4' and '<i8' are supported)")]
    UnsupportedDtype(String),
    #[error("IoError: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum HubError {
    #[error("ManifestParse: {0}")]
    ManifestParse(String),
    #[error("MissingFile: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("CrossValidation: {0}")]
    CrossValidation(String),
    #[error("DuplicateModel: model_id {0:?} appears more than once")]
    DuplicateModel(String),
    #[error("{}: {source}", path.display())]
    Tensor { path: PathBuf, source: TensorError },
}

#[derive(Debug, Error)]
pub enum GroundTruthError {
    #[error("ParseError: {0}")]
    Parse(String),
    #[error("RangeError: line {line}: accuracy {value} outside [0, 1]")]
    Range { line: u64, value: f64 },
    #[error("UnknownStrategy: line {line}: {value:?} (expected head or full)")]
    UnknownStrategy { line: u64, value: String },
}

/// Fine-tuning strategy a ground-truth accuracy (and a drift probe) refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Head,
    Full,
}

impl Strategy {
    pub const ALL: [Strategy; 2] = [Strategy::Head, Strategy::Full];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Head => "head",
            Strategy::Full => "full",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
#[error("unknown strategy {0:?} (expected head or full)")]
pub struct ParseStrategyError(pub String);

impl FromStr for Strategy {
    type Err = ParseStrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "head" => Ok(Strategy::Head),
            "full" => Ok(Strategy::Full),
            other => Err(ParseStrategyError(other.to_string())),
        }
    }
}
