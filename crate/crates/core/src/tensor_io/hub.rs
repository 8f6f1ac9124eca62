//! Hub manifest schema and whole-hub loading.
//!
//! Paths inside a manifest are resolved relative to the directory holding the
//! manifest file. Unknown JSON keys are ignored; missing required keys fail.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::blob::TensorBlob;
use super::feature::{FeatureSet, HeadWeights};
use super::npy::read_tensor;
use super::snapshot::WeightSnapshot;
use super::HubError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubManifest {
    pub version: u32,
    pub models: Vec<ModelRecord>,
    pub datasets: Vec<DatasetRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub model_id: String,
    pub source_dataset: String,
    /// Backbone parameter count; only its order matters to the harness.
    pub param_count: u64,
    #[serde(rename = "features")]
    pub feature_paths: BTreeMap<String, PathBuf>,
    #[serde(rename = "logits")]
    pub logit_paths: BTreeMap<String, PathBuf>,
    #[serde(rename = "head_weights", default, skip_serializing_if = "Option::is_none")]
    pub head_weight_path: Option<PathBuf>,
    #[serde(rename = "head_bias", default, skip_serializing_if = "Option::is_none")]
    pub head_bias_path: Option<PathBuf>,
    #[serde(rename = "snapshots", default, skip_serializing_if = "BTreeMap::is_empty")]
    pub snapshot_paths: BTreeMap<String, SnapshotPaths>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotPaths {
    pub before: PathBuf,
    pub after: PathBuf,
}

/// A dataset entry: either a bare id string, or an object carrying the
/// target-label tensor and optionally the number of target classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "DatasetEntry", into = "DatasetEntry")]
pub struct DatasetRecord {
    pub id: String,
    pub labels: Option<PathBuf>,
    pub num_classes: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DatasetEntry {
    Id(String),
    Described {
        id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        num_classes: Option<usize>,
    },
}

impl From<DatasetEntry> for DatasetRecord {
    fn from(e: DatasetEntry) -> Self {
        match e {
            DatasetEntry::Id(id) => Self { id, labels: None, num_classes: None },
            DatasetEntry::Described { id, labels, num_classes } => Self { id, labels, num_classes },
        }
    }
}

impl From<DatasetRecord> for DatasetEntry {
    fn from(r: DatasetRecord) -> Self {
        match (r.labels, r.num_classes) {
            (None, None) => DatasetEntry::Id(r.id),
            (labels, num_classes) => DatasetEntry::Described { id: r.id, labels, num_classes },
        }
    }
}

impl HubManifest {
    pub fn from_json(text: &str) -> Result<Self, HubError> {
        let manifest: HubManifest = serde_json::from_str(text).map_err(|e| HubError::ManifestParse(e.to_string()))?;
        manifest.check_records()?;
        Ok(manifest)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    fn check_records(&self) -> Result<(), HubError> {
        let mut ids = BTreeSet::new();
        for m in &self.models {
            if !ids.insert(m.model_id.as_str()) {
                return Err(HubError::DuplicateModel(m.model_id.clone()));
            }
            if m.param_count == 0 {
                return Err(HubError::ManifestParse(format!("model {:?}: param_count must be positive", m.model_id)));
            }
        }
        let mut datasets = BTreeSet::new();
        for d in &self.datasets {
            if !datasets.insert(d.id.as_str()) {
                return Err(HubError::ManifestParse(format!("dataset {:?} listed twice", d.id)));
            }
        }
        Ok(())
    }

    pub fn model(&self, model_id: &str) -> Option<&ModelRecord> {
        self.models.iter().find(|m| m.model_id == model_id)
    }

    pub fn dataset(&self, id: &str) -> Option<&DatasetRecord> {
        self.datasets.iter().find(|d| d.id == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotPair {
    pub before: WeightSnapshot,
    pub after: WeightSnapshot,
}

/// A manifest with every referenced tensor loaded and cross-validated.
/// Models are held sorted by `model_id`.
#[derive(Debug, Clone)]
pub struct Hub {
    manifest: HubManifest,
    root: PathBuf,
    feature_sets: BTreeMap<(String, String), FeatureSet>,
    heads: BTreeMap<String, HeadWeights>,
    snapshots: BTreeMap<(String, String), SnapshotPair>,
}

impl Hub {
    pub fn manifest(&self) -> &HubManifest {
        &self.manifest
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn models(&self) -> &[ModelRecord] {
        &self.manifest.models
    }

    pub fn feature_set(&self, model_id: &str, dataset: &str) -> Option<&FeatureSet> {
        self.feature_sets.get(&(model_id.to_string(), dataset.to_string()))
    }

    pub fn head(&self, model_id: &str) -> Option<&HeadWeights> {
        self.heads.get(model_id)
    }

    pub fn snapshots(&self, model_id: &str, dataset: &str) -> Option<&SnapshotPair> {
        self.snapshots.get(&(model_id.to_string(), dataset.to_string()))
    }

    pub fn feature_set_count(&self) -> usize {
        self.feature_sets.len()
    }
}

fn resolve(root: &Path, p: &Path) -> PathBuf {
    root.join(p)
}

fn load_file(path: &Path) -> Result<TensorBlob, HubError> {
    if !path.is_file() {
        return Err(HubError::MissingFile(path.to_path_buf()));
    }
    read_tensor(path).map_err(|source| HubError::Tensor { path: path.to_path_buf(), source })
}

fn in_context<T>(r: Result<T, HubError>, context: &str) -> Result<T, HubError> {
    r.map_err(|e| match e {
        HubError::CrossValidation(msg) => HubError::CrossValidation(format!("{context}: {msg}")),
        other => other,
    })
}

/// Loads a manifest and every tensor it references.
pub fn load_hub(manifest_path: impl AsRef<Path>) -> Result<Hub, HubError> {
    let manifest_path = manifest_path.as_ref();
    if !manifest_path.is_file() {
        return Err(HubError::MissingFile(manifest_path.to_path_buf()));
    }
    let text = fs::read_to_string(manifest_path)
        .map_err(|e| HubError::ManifestParse(format!("{}: {e}", manifest_path.display())))?;
    let mut manifest = HubManifest::from_json(&text)?;
    manifest.models.sort_by(|a, b| a.model_id.cmp(&b.model_id));
    let root = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();

    let mut labels: BTreeMap<String, Option<TensorBlob>> = BTreeMap::new();
    for d in &manifest.datasets {
        let blob = match &d.labels {
            Some(p) => {
                let path = resolve(&root, p);
                let blob = load_file(&path)?;
                check_labels(&blob, d.num_classes)
                    .map_err(|m| HubError::CrossValidation(format!("{}: {m}", path.display())))?;
                Some(blob)
            }
            None => None,
        };
        labels.insert(d.id.clone(), blob);
    }

    let mut feature_sets = BTreeMap::new();
    let mut heads = BTreeMap::new();
    let mut snapshots = BTreeMap::new();
    for m in &manifest.models {
        let feature_keys: BTreeSet<_> = m.feature_paths.keys().collect();
        let logit_keys: BTreeSet<_> = m.logit_paths.keys().collect();
        if feature_keys != logit_keys {
            return Err(HubError::CrossValidation(format!(
                "model {:?}: features cover datasets {feature_keys:?} but logits cover {logit_keys:?}",
                m.model_id
            )));
        }
        let head = match &m.head_weight_path {
            Some(p) => {
                let weight = load_file(&resolve(&root, p))?;
                let bias = m.head_bias_path.as_ref().map(|b| load_file(&resolve(&root, b))).transpose()?;
                Some(in_context(HeadWeights::new(weight, bias), &format!("model {:?}", m.model_id))?)
            }
            None if m.head_bias_path.is_some() => {
                return Err(HubError::CrossValidation(format!(
                    "model {:?}: head_bias given without head_weights",
                    m.model_id
                )))
            }
            None => None,
        };

        for (dataset, fpath) in &m.feature_paths {
            let context = format!("model {:?} on {dataset:?}", m.model_id);
            let dataset_labels = labels.get(dataset).ok_or_else(|| {
                HubError::CrossValidation(format!("{context}: dataset is not declared in `datasets`"))
            })?;
            let features = load_file(&resolve(&root, fpath))?;
            let logits = load_file(&resolve(&root, &m.logit_paths[dataset]))?;
            let fs = in_context(FeatureSet::new(features, logits, dataset_labels.clone()), &context)?;
            if let Some(h) = &head {
                if h.classes() != fs.source_classes() || h.dim() != fs.dim() {
                    return Err(HubError::CrossValidation(format!(
                        "{context}: head is [{} x {}] but features/logits imply [{} x {}]",
                        h.classes(),
                        h.dim(),
                        fs.source_classes(),
                        fs.dim()
                    )));
                }
            }
            feature_sets.insert((m.model_id.clone(), dataset.clone()), fs);
        }

        for (dataset, sp) in &m.snapshot_paths {
            let context = format!("model {:?} snapshots on {dataset:?}", m.model_id);
            if !labels.contains_key(dataset) {
                return Err(HubError::CrossValidation(format!("{context}: dataset is not declared in `datasets`")));
            }
            let before_path = resolve(&root, &sp.before);
            let after_path = resolve(&root, &sp.after);
            let before = WeightSnapshot::from_blob("params", &load_file(&before_path)?)
                .map_err(|e| HubError::CrossValidation(format!("{}: {e}", before_path.display())))?;
            let after = WeightSnapshot::from_blob("params", &load_file(&after_path)?)
                .map_err(|e| HubError::CrossValidation(format!("{}: {e}", after_path.display())))?;
            if before.total_len() != after.total_len() {
                return Err(HubError::CrossValidation(format!(
                    "{context}: before has {} parameters, after has {}",
                    before.total_len(),
                    after.total_len()
                )));
            }
            snapshots.insert((m.model_id.clone(), dataset.clone()), SnapshotPair { before, after });
        }

        if let Some(h) = head {
            heads.insert(m.model_id.clone(), h);
        }
    }

    Ok(Hub { manifest, root, feature_sets, heads, snapshots })
}

fn check_labels(blob: &TensorBlob, num_classes: Option<usize>) -> Result<(), String> {
    let values = blob
        .as_i64()
        .filter(|_| blob.shape().len() == 1)
        .ok_or_else(|| format!("labels must be a 1-D i64 vector, got shape {:?}", blob.shape()))?;
    if let Some(c) = num_classes {
        if let Some(bad) = values.iter().find(|&&v| v < 0 || v as u64 >= c as u64) {
            return Err(format!("label {bad} outside [0, {c})"));
        }
    }
    Ok(())
}
