//! Synthetic model hubs with known ground truth.
//!
//! Each synthetic model embeds `C` Gaussian classes with unit covariance
//! around the vertices of a regular simplex whose edge length is the model's
//! separability `s`. Its exported logits come from the Bayes linear head
//! perturbed by Gaussian noise, while its ground-truth accuracy is the Bayes
//! accuracy of the unperturbed head, estimated by Monte Carlo.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::rng::{child_seed, rng_from_seed, Rng};
use crate::tensor_io::{
    write_tensor, DatasetRecord, FeatureSet, GroundTruthError, GroundTruthTable, HeadWeights, HubError, HubManifest,
    ModelRecord, Strategy, TensorBlob, TensorError,
};

pub const MONTE_CARLO_DRAWS: usize = 100_000;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("BadSpec: {0}")]
    BadSpec(String),
    #[error("IoError: {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Hub(#[from] HubError),
    #[error(transparent)]
    GroundTruth(#[from] GroundTruthError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthModelSpec {
    pub model_id: String,
    pub separability: f64,
    pub dim: usize,
    pub classes: usize,
    pub n_samples: usize,
    pub head_noise: f64,
    pub param_count: u64,
    pub seed: u64,
}

impl SynthModelSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::BadSpec(m));
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.dim + 1 < self.classes {
            return bad(format!("dim {} is below classes - 1 = {}", self.dim, self.classes - 1));
        }
        if self.n_samples < 10 * self.classes {
            return bad(format!("need at least {} samples, got {}", 10 * self.classes, self.n_samples));
        }
        if !(self.separability.is_finite() && self.separability >= 0.0) {
            return bad(format!("separability must be finite and >= 0, got {}", self.separability));
        }
        if !(self.head_noise.is_finite() && self.head_noise >= 0.0) {
            return bad(format!("head_noise must be finite and >= 0, got {}", self.head_noise));
        }
        if self.param_count == 0 {
            return bad("param_count must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthModel {
    /// Features, perturbed-head logits and balanced labels `i % C`.
    pub features: FeatureSet,
    pub head: HeadWeights,
    pub accuracy: f64,
}

/// Class means `[C x (C-1)]`: the simplex vertices `e_c - 1/C` expressed in
/// the Helmert basis of the sum-zero subspace, scaled to edge length `s`.
pub fn simplex_means(classes: usize, s: f64) -> Vec<Vec<f64>> {
    let scale = s / std::f64::consts::SQRT_2;
    (0..classes)
        .map(|c| {
            (1..classes)
                .map(|k| {
                    let norm = ((k * (k + 1)) as f64).sqrt();
                    let h = match c.cmp(&k) {
                        std::cmp::Ordering::Less => 1.0,
                        std::cmp::Ordering::Equal => -(k as f64),
                        std::cmp::Ordering::Greater => 0.0,
                    };
                    scale * h / norm
                })
                .collect()
        })
        .collect()
}

fn normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate() {
        if v > scores[best] {
            best = i;
        }
    }
    best
}

/// Monte-Carlo accuracy of the Bayes head on fresh balanced draws.
fn bayes_accuracy(means: &[Vec<f64>], draws: usize, seed: u64) -> f64 {
    let classes = means.len();
    let half_norms: Vec<f64> = means.iter().map(|m| 0.5 * m.iter().map(|v| v * v).sum::<f64>()).collect();
    let mut rng = rng_from_seed(seed);
    let mut x = vec![0.0; classes - 1];
    let mut scores = vec![0.0; classes];
    let mut correct = 0usize;
    for i in 0..draws {
        let y = i % classes;
        for (xk, mk) in x.iter_mut().zip(&means[y]) {
            *xk = mk + normal(&mut rng);
        }
        for c in 0..classes {
            scores[c] = means[c].iter().zip(&x).map(|(m, v)| m * v).sum::<f64>() - half_norms[c];
        }
        if argmax(&scores) == y {
            correct += 1;
        }
    }
    correct as f64 / draws as f64
}

pub fn gen_synthetic_model(spec: &SynthModelSpec) -> Result<SynthModel, SynthError> {
    spec.validate()?;
    let (n, d, c) = (spec.n_samples, spec.dim, spec.classes);
    let means = simplex_means(c, spec.separability);

    let mut rng = rng_from_seed(child_seed(spec.seed, 0));
    let labels: Vec<i64> = (0..n).map(|i| (i % c) as i64).collect();
    let mut x = vec![0.0f64; n * d];
    for i in 0..n {
        let mu = &means[i % c];
        for k in 0..d {
            x[i * d + k] = mu.get(k).copied().unwrap_or(0.0) + normal(&mut rng);
        }
    }

    let mut rng = rng_from_seed(child_seed(spec.seed, 1));
    let mut w = vec![0.0f64; c * d];
    let mut b = vec![0.0f64; c];
    for j in 0..c {
        for k in 0..d {
            w[j * d + k] = means[j].get(k).copied().unwrap_or(0.0) + spec.head_noise * normal(&mut rng);
        }
        b[j] = -0.5 * means[j].iter().map(|v| v * v).sum::<f64>() + spec.head_noise * normal(&mut rng);
    }
    // the exported head is the f32 one, so logits are computed from it
    let w32: Vec<f32> = w.iter().map(|&v| v as f32).collect();
    let b32: Vec<f32> = b.iter().map(|&v| v as f32).collect();
    let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
    let mut logits = vec![0.0f32; n * c];
    for i in 0..n {
        let row = &x32[i * d..(i + 1) * d];
        for j in 0..c {
            let dot: f64 = row.iter().zip(&w32[j * d..(j + 1) * d]).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum();
            logits[i * c + j] = (dot + f64::from(b32[j])) as f32;
        }
    }

    let features = FeatureSet::new(
        TensorBlob::from_f32(vec![n, d], x32)?,
        TensorBlob::from_f32(vec![n, c], logits)?,
        Some(TensorBlob::from_i64(vec![n], labels)?),
    )?;
    let head = HeadWeights::new(TensorBlob::from_f32(vec![c, d], w32)?, Some(TensorBlob::from_f32(vec![c], b32)?))?;
    let accuracy = bayes_accuracy(&means, MONTE_CARLO_DRAWS, child_seed(spec.seed, 2));
    Ok(SynthModel { features, head, accuracy })
}

/// Settings of a synthetic hub. Separabilities are evenly spaced over
/// `[s_low, s_high]`; the model at fraction `t` of that range gets
/// `head_noise = noise_base + noise_slope * (1 - t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HubConfig {
    pub seed: u64,
    pub n_models: usize,
    pub s_low: f64,
    pub s_high: f64,
    pub classes: usize,
    pub dim: usize,
    pub n_samples: usize,
    pub noise_base: f64,
    pub noise_slope: f64,
    pub source: String,
    pub target: String,
}

impl Default for HubConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_models: 10,
            s_low: 0.5,
            s_high: 5.0,
            classes: 4,
            dim: 16,
            n_samples: 1000,
            noise_base: 0.05,
            noise_slope: 0.25,
            source: "synth-source".into(),
            target: "synth-target".into(),
        }
    }
}

impl HubConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::BadSpec(m));
        if self.n_models < 2 {
            return bad(format!("need at least 2 models, got {}", self.n_models));
        }
        if !(self.s_low.is_finite() && self.s_high.is_finite() && self.s_low >= 0.0 && self.s_low < self.s_high) {
            return bad(format!("need 0 <= s_low < s_high, got {} and {}", self.s_low, self.s_high));
        }
        if !(self.noise_base.is_finite()
            && self.noise_slope.is_finite()
            && self.noise_base >= 0.0
            && self.noise_slope >= 0.0)
        {
            return bad("noise_base and noise_slope must be finite and >= 0".into());
        }
        if self.source.is_empty() || self.target.is_empty() || self.source == self.target {
            return bad("source and target must be distinct non-empty ids".into());
        }
        Ok(())
    }

    /// Model specs in ascending order of separability.
    pub fn model_specs(&self) -> Result<Vec<SynthModelSpec>, SynthError> {
        self.validate()?;
        let m = self.n_models;
        let mut counts: Vec<u64> = (1..=m as u64).map(|i| i * 1_000_000).collect();
        counts.shuffle(&mut rng_from_seed(child_seed(self.seed, m as u64)));
        let specs: Vec<SynthModelSpec> = (0..m)
            .map(|i| {
                let t = i as f64 / (m - 1) as f64;
                SynthModelSpec {
                    model_id: format!("synth-{i:02}"),
                    separability: self.s_low + t * (self.s_high - self.s_low),
                    dim: self.dim,
                    classes: self.classes,
                    n_samples: self.n_samples,
                    head_noise: self.noise_base + self.noise_slope * (1.0 - t),
                    param_count: counts[i],
                    seed: child_seed(self.seed, i as u64),
                }
            })
            .collect();
        for s in &specs {
            s.validate()?;
        }
        Ok(specs)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io { path: path.to_path_buf(), source }
}

fn write_text(path: &Path, text: &str) -> Result<(), SynthError> {
    fs::write(path, text).map_err(io_err(path))
}

/// Writes `manifest.json`, `gt.csv`, the target labels and one directory of
/// tensors per model under `out`. Ground truth is recorded for both
/// strategies.
pub fn gen_hub(cfg: &HubConfig, out: &Path) -> Result<(HubManifest, GroundTruthTable), SynthError> {
    let specs = cfg.model_specs()?;
    let models: Vec<SynthModel> = {
        use rayon::prelude::*;
        specs.par_iter().map(gen_synthetic_model).collect::<Result<_, _>>()?
    };

    fs::create_dir_all(out.join("models")).map_err(io_err(out))?;
    let labels_rel = PathBuf::from(format!("labels_{}.npy", cfg.target));
    write_tensor(models[0].features.labels_blob().expect("synthetic labels"), out.join(&labels_rel))?;

    let mut records = Vec::with_capacity(specs.len());
    let mut gt = GroundTruthTable::new();
    for (spec, model) in specs.iter().zip(&models) {
        let dir_rel = PathBuf::from("models").join(&spec.model_id);
        let dir = out.join(&dir_rel);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let feat_rel = dir_rel.join(format!("features_{}.npy", cfg.target));
        let logit_rel = dir_rel.join(format!("logits_{}.npy", cfg.target));
        let w_rel = dir_rel.join("head_weight.npy");
        let b_rel = dir_rel.join("head_bias.npy");
        write_tensor(model.features.features_blob(), out.join(&feat_rel))?;
        write_tensor(model.features.logits_blob(), out.join(&logit_rel))?;
        write_tensor(&model.head.weight, out.join(&w_rel))?;
        write_tensor(model.head.bias.as_ref().expect("synthetic bias"), out.join(&b_rel))?;
        records.push(ModelRecord {
            model_id: spec.model_id.clone(),
            source_dataset: cfg.source.clone(),
            param_count: spec.param_count,
            feature_paths: BTreeMap::from([(cfg.target.clone(), feat_rel)]),
            logit_paths: BTreeMap::from([(cfg.target.clone(), logit_rel)]),
            head_weight_path: Some(w_rel),
            head_bias_path: Some(b_rel),
            snapshot_paths: BTreeMap::new(),
        });
        for strategy in Strategy::ALL {
            gt.insert(&spec.model_id, &cfg.target, strategy, model.accuracy)?;
        }
    }
    let manifest = HubManifest {
        version: 1,
        models: records,
        datasets: vec![
            DatasetRecord { id: cfg.source.clone(), labels: None, num_classes: None },
            DatasetRecord { id: cfg.target.clone(), labels: Some(labels_rel), num_classes: Some(cfg.classes) },
        ],
    };
    write_text(&out.join("manifest.json"), &manifest.to_json())?;
    write_text(&out.join("gt.csv"), &gt.to_csv())?;
    Ok((manifest, gt))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(s: f64, classes: usize, dim: usize, seed: u64) -> SynthModelSpec {
        SynthModelSpec {
            model_id: "m".into(),
            separability: s,
            dim,
            classes,
            n_samples: 200,
            head_noise: 0.1,
            param_count: 1,
            seed,
        }
    }

    fn std_normal_cdf(x: f64) -> f64 {
        // Abramowitz-Stegun 7.1.26 on erf, error below 1.5e-7
        let z = x / std::f64::consts::SQRT_2;
        let t = 1.0 / (1.0 + 0.327_591_1 * z.abs());
        let poly =
            t * (0.254_829_592 + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
        let erf = 1.0 - poly * (-z * z).exp();
        0.5 * (1.0 + erf.copysign(z))
    }

    #[test]
    fn simplex_edges_have_length_s() {
        for c in 2..7 {
            let m = simplex_means(c, 3.0);
            for i in 0..c {
                for j in i + 1..c {
                    let d2: f64 = m[i].iter().zip(&m[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                    assert!((d2.sqrt() - 3.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn chance_level_when_means_coincide() {
        let acc = gen_synthetic_model(&spec(0.0, 2, 4, 1)).unwrap().accuracy;
        assert!((0.49..=0.51).contains(&acc), "{acc}");
    }

    #[test]
    fn two_class_accuracy_matches_closed_form() {
        let acc = gen_synthetic_model(&spec(4.0, 2, 2, 7)).unwrap().accuracy;
        let exact = std_normal_cdf(2.0);
        assert!((exact - 0.97725).abs() < 1e-5);
        assert!((acc - exact).abs() < 0.005, "{acc} vs {exact}");
    }

    #[test]
    fn seeds_change_bits_not_accuracy() {
        let a = gen_synthetic_model(&spec(2.0, 3, 4, 1)).unwrap();
        let b = gen_synthetic_model(&spec(2.0, 3, 4, 2)).unwrap();
        assert_ne!(a.features.features(), b.features.features());
        assert!((a.accuracy - b.accuracy).abs() < 0.01);
        let again = gen_synthetic_model(&spec(2.0, 3, 4, 1)).unwrap();
        assert_eq!(a.features.features(), again.features.features());
        assert_eq!(a.accuracy, again.accuracy);
    }

    #[test]
    fn logits_come_from_the_exported_head() {
        let m = gen_synthetic_model(&spec(2.0, 3, 4, 3)).unwrap();
        let (w, b) = (m.head.weight.as_f32().unwrap(), m.head.bias.as_ref().unwrap().as_f32().unwrap());
        let x = &m.features.features()[..4];
        let expect: f64 =
            x.iter().zip(&w[..4]).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum::<f64>() + f64::from(b[0]);
        assert_eq!(m.features.logits()[0], expect as f32);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(gen_synthetic_model(&spec(1.0, 1, 4, 0)).is_err());
        assert!(gen_synthetic_model(&spec(1.0, 6, 4, 0)).is_err());
        assert!(gen_synthetic_model(&spec(-1.0, 2, 4, 0)).is_err());
        let mut s = spec(1.0, 4, 4, 0);
        s.n_samples = 39;
        assert!(gen_synthetic_model(&s).is_err());
        let cfg = HubConfig { s_low: 5.0, s_high: 1.0, ..HubConfig::default() };
        assert!(matches!(cfg.model_specs(), Err(SynthError::BadSpec(_))));
    }

    #[test]
    fn schedule_and_param_counts() {
        let specs = HubConfig::default().model_specs().unwrap();
        assert_eq!(specs.len(), 10);
        assert_eq!(specs[0].separability, 0.5);
        assert_eq!(specs[9].separability, 5.0);
        assert!(specs.windows(2).all(|w| w[0].head_noise > w[1].head_noise));
        let mut counts: Vec<u64> = specs.iter().map(|s| s.param_count).collect();
        assert_ne!(counts, (1..=10).map(|i| i * 1_000_000).collect::<Vec<_>>());
        counts.sort();
        assert_eq!(counts, (1..=10).map(|i| i * 1_000_000).collect::<Vec<_>>());
    }
}
