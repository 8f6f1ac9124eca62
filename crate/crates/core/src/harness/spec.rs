use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::metrics::{LogMeConfig, MetricId, DEFAULT_SHRINKAGE};
use crate::tensor_io::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexitySpec {
    pub levels: usize,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricParams {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda: f64,
    pub logme_max_iter: usize,
    pub logme_tol: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        let logme = LogMeConfig::default();
        Self {
            lr: 0.01,
            epochs: 2,
            batch_size: 64,
            lambda: DEFAULT_SHRINKAGE,
            logme_max_iter: logme.max_iter,
            logme_tol: logme.tol,
        }
    }
}

impl MetricParams {
    pub fn logme_config(&self) -> LogMeConfig {
        LogMeConfig { max_iter: self.logme_max_iter, tol: self.logme_tol }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |msg: String| Err(EvalError::InvalidSpec(msg));
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return bad(format!("lr must be finite and >= 0, got {}", self.lr));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if self.logme_max_iter == 0 || !(self.logme_tol.is_finite() && self.logme_tol > 0.0) {
            return bad("logme_max_iter must be >= 1 and logme_tol > 0".into());
        }
        Ok(())
    }
}

fn default_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub sources: Vec<String>,
    pub targets: Vec<String>,
    pub metrics: Vec<MetricId>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default)]
    pub complexity: Option<ComplexitySpec>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub metric_params: MetricParams,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let spec: Self = serde_json::from_str(text).map_err(|e| EvalError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        fn distinct<T: Ord>(name: &str, items: &[T]) -> Result<(), EvalError> {
            if items.is_empty() {
                return Err(EvalError::InvalidSpec(format!("{name} must not be empty")));
            }
            if items.iter().collect::<BTreeSet<_>>().len() != items.len() {
                return Err(EvalError::InvalidSpec(format!("{name} contains duplicates")));
            }
            Ok(())
        }
        distinct("sources", &self.sources)?;
        distinct("targets", &self.targets)?;
        distinct("metrics", &self.metrics)?;
        distinct("strategies", &self.strategies)?;
        if let Some(c) = self.complexity {
            if c.levels == 0 || c.window < 2 {
                return Err(EvalError::InvalidSpec(format!(
                    "complexity needs levels >= 1 and window >= 2, got {} and {}",
                    c.levels, c.window
                )));
            }
        }
        self.metric_params.validate()
    }

    /// Complexity levels to evaluate; `None` stands for the whole pool.
    pub fn levels(&self) -> Vec<Option<usize>> {
        match self.complexity {
            Some(c) => (1..=c.levels).map(Some).collect(),
            None => vec![None],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let spec = ExperimentSpec::from_json(r#"{"sources":["a"],"targets":["b"],"metrics":["leep"]}"#).unwrap();
        assert_eq!(spec.strategies, vec![Strategy::Head, Strategy::Full]);
        assert_eq!(spec.seed, 42);
        assert_eq!(spec.complexity, None);
        assert_eq!(spec.metric_params, MetricParams::default());
        assert_eq!(spec.levels(), vec![None]);
    }

    #[test]
    fn full_schema() {
        let text = r#"{"sources": ["a"], "targets": ["b","c"], "metrics": ["logme","wassersteindrift"],
            "strategies": ["head"], "complexity": {"levels": 5, "window": 7}, "seed": 7,
            "metric_params": {"lr": 0.02, "epochs": 3, "batch_size": 32, "lambda": 0.2}}"#;
        let spec = ExperimentSpec::from_json(text).unwrap();
        assert_eq!(spec.levels().len(), 5);
        assert_eq!(spec.metric_params.epochs, 3);
        assert_eq!(spec.metric_params.logme_max_iter, 100);
    }

    #[test]
    fn rejects_bad_specs() {
        for text in [
            r#"{"sources":[],"targets":["b"],"metrics":["leep"]}"#,
            r#"{"sources":["a"],"targets":["b"],"metrics":["leep"],"strategies":["partial"]}"#,
            r#"{"sources":["a"],"targets":["b"],"metrics":["foo"]}"#,
            r#"{"sources":["a"],"targets":["b"],"metrics":["leep"],"complexity":{"levels":3,"window":1}}"#,
            r#"{"sources":["a"],"targets":["b"],"metrics":["leep"],"metric_params":{"lambda":2}}"#,
            r#"{"sources":["a"],"targets":["b"],"metrics":["leep"],"extra":1}"#,
            r#"{"sources":["a","a"],"targets":["b"],"metrics":["leep"]}"#,
        ] {
            assert!(matches!(ExperimentSpec::from_json(text), Err(EvalError::InvalidSpec(_))), "{text}");
        }
    }
}
