use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::{
    complexity_subset, kendall_tau, score_model, weighted_kendall_tau, AbsentCell, Cell, CellEntry, EvalError,
    ExperimentSpec, ResultTable,
};
use crate::metrics::MetricId;
use crate::tensor_io::{GroundTruthTable, Hub, ModelRecord, Strategy};

/// One model score; label-based metrics ignore the strategy so they share
/// a job across strategies.
type JobKey = (String, String, MetricId, Option<Strategy>);

fn job_key(model_id: &str, target: &str, metric: MetricId, strategy: Strategy) -> JobKey {
    let s = metric.is_drift().then_some(strategy);
    (model_id.to_string(), target.to_string(), metric, s)
}

struct Planned {
    source: String,
    target: String,
    metric: MetricId,
    strategy: Strategy,
    level: Option<usize>,
    models: Vec<(String, f64)>,
}

/// Evaluates every (source, target, metric, strategy, level) cell of `spec`
/// on `hub` with up to `jobs` worker threads and returns the aggregated
/// table. Cells come out sorted by key, so the result does not depend on
/// scheduling.
pub fn run_experiment(
    spec: &ExperimentSpec,
    hub: &Hub,
    ground_truth: &GroundTruthTable,
    jobs: usize,
) -> Result<ResultTable, EvalError> {
    spec.validate()?;
    let sources: BTreeSet<&String> = spec.sources.iter().collect();
    let targets: BTreeSet<&String> = spec.targets.iter().collect();
    let metrics: BTreeSet<MetricId> = spec.metrics.iter().copied().collect();
    let strategies: BTreeSet<Strategy> = spec.strategies.iter().copied().collect();

    let mut planned = Vec::new();
    let mut absent = Vec::new();
    for &source in &sources {
        let pool: Vec<ModelRecord> = hub.models().iter().filter(|m| &m.source_dataset == source).cloned().collect();
        for &target in &targets {
            for &metric in &metrics {
                for &strategy in &strategies {
                    for level in spec.levels() {
                        let mut skip = |reason: String| {
                            absent.push(AbsentCell {
                                source: source.clone(),
                                target: target.clone(),
                                metric,
                                strategy,
                                level,
                                reason,
                            })
                        };
                        if source == target {
                            skip("target is the source dataset".into());
                            continue;
                        }
                        let subset: Vec<&ModelRecord> = match (level, spec.complexity) {
                            (Some(l), Some(c)) => match complexity_subset(&pool, l, c.levels, c.window) {
                                Ok(s) => s,
                                Err(e) => {
                                    skip(e.to_string());
                                    continue;
                                }
                            },
                            _ => pool.iter().collect(),
                        };
                        let ids: Vec<&str> = subset
                            .iter()
                            .filter(|m| hub.feature_set(&m.model_id, target).is_some())
                            .map(|m| m.model_id.as_str())
                            .collect();
                        if ids.len() < 2 {
                            skip(format!(
                                "EmptyCell: {} of {} models have features for the target",
                                ids.len(),
                                subset.len()
                            ));
                            continue;
                        }
                        let mut models = Vec::with_capacity(ids.len());
                        for id in ids {
                            let g = ground_truth.get(id, target, strategy).ok_or_else(|| {
                                EvalError::MissingGroundTruth {
                                    model_id: id.to_string(),
                                    target: target.clone(),
                                    strategy,
                                }
                            })?;
                            models.push((id.to_string(), g));
                        }
                        models.sort_by(|a, b| a.0.cmp(&b.0));
                        planned.push(Planned {
                            source: source.clone(),
                            target: target.clone(),
                            metric,
                            strategy,
                            level,
                            models,
                        });
                    }
                }
            }
        }
    }

    let keys: Vec<JobKey> = planned
        .iter()
        .flat_map(|p| p.models.iter().map(|(id, _)| job_key(id, &p.target, p.metric, p.strategy)))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    log::info!("{} cells, {} absent, {} scores to compute", planned.len(), absent.len(), keys.len());

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| EvalError::InvalidSpec(format!("cannot start {jobs} workers: {e}")))?;
    let results: Vec<_> = pool.install(|| {
        keys.par_iter()
            .map(|(model, target, metric, strategy)| {
                let strategy = strategy.unwrap_or(Strategy::Head);
                score_model(hub, model, target, *metric, strategy, &spec.metric_params, spec.seed)
            })
            .collect()
    });
    let mut scores: BTreeMap<&JobKey, f64> = BTreeMap::new();
    for (key, result) in keys.iter().zip(results) {
        match result {
            Ok(v) => {
                scores.insert(key, v.value);
            }
            Err(source) => {
                return Err(EvalError::Score { model_id: key.0.clone(), target: key.1.clone(), metric: key.2, source })
            }
        }
    }

    let mut cells = Vec::with_capacity(planned.len());
    for p in planned {
        let entries: Vec<CellEntry> = p
            .models
            .iter()
            .map(|(id, g)| CellEntry {
                model_id: id.clone(),
                score: scores[&job_key(id, &p.target, p.metric, p.strategy)],
                ground_truth: *g,
            })
            .collect();
        let ground: Vec<f64> = entries.iter().map(|e| e.ground_truth).collect();
        let t: Vec<f64> = entries.iter().map(|e| e.score).collect();
        cells.push(Cell {
            n_models: entries.len(),
            tau_w: weighted_kendall_tau(&ground, &t)?,
            tau: kendall_tau(&ground, &t)?,
            source: p.source,
            target: p.target,
            metric: p.metric,
            strategy: p.strategy,
            level: p.level,
            entries,
        });
    }
    for a in &absent {
        if !a.is_diagonal() {
            log::warn!("absent cell {}/{}/{}/{}: {}", a.source, a.target, a.metric, a.strategy, a.reason);
        }
    }
    let table = ResultTable { cells, absent, ..Default::default() };
    if table.cells.is_empty() {
        return Ok(table);
    }
    table.aggregate()
}
