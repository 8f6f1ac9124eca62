use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::EvalError;
use crate::metrics::MetricId;
use crate::tensor_io::Strategy;

pub const CELLS_HEADER: [&str; 8] = ["source", "target", "metric", "strategy", "level", "n_models", "tau_w", "tau"];
pub const SCORES_HEADER: [&str; 8] =
    ["source", "target", "metric", "strategy", "level", "model_id", "score", "ground_truth"];
pub const AGGREGATES_HEADER: [&str; 7] = ["scope", "source", "metric", "strategy", "n", "mean_tau_w", "mean_tau"];
pub const SIGMA_HEADER: [&str; 3] = ["metric", "n_levels", "sigma"];

#[derive(Debug, Clone, PartialEq)]
pub struct CellEntry {
    pub model_id: String,
    pub score: f64,
    pub ground_truth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub source: String,
    pub target: String,
    pub metric: MetricId,
    pub strategy: Strategy,
    /// Complexity level, `None` when the whole source pool is ranked.
    pub level: Option<usize>,
    pub n_models: usize,
    pub tau_w: f64,
    pub tau: f64,
    /// Per-model scores, sorted by `model_id`. Empty when read back from `cells.csv` alone.
    pub entries: Vec<CellEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbsentCell {
    pub source: String,
    pub target: String,
    pub metric: MetricId,
    pub strategy: Strategy,
    pub level: Option<usize>,
    pub reason: String,
}

impl AbsentCell {
    pub fn is_diagonal(&self) -> bool {
        self.source == self.target
    }
}

/// Mean over targets (and levels) for one source, metric and strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub source: String,
    pub metric: MetricId,
    pub strategy: Strategy,
    pub n_cells: usize,
    pub mean_tau_w: f64,
    pub mean_tau: f64,
}

/// Mean of the per-source means for one metric and strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceMeanRow {
    pub metric: MetricId,
    pub strategy: Strategy,
    pub n_sources: usize,
    pub mean_tau_w: f64,
    pub mean_tau: f64,
}

/// Population standard deviation over complexity levels of the per-level mean `tau_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaRow {
    pub metric: MetricId,
    pub n_levels: usize,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub cells: Vec<Cell>,
    pub absent: Vec<AbsentCell>,
    pub aggregates: Vec<AggregateRow>,
    pub source_means: Vec<SourceMeanRow>,
    pub subset_sigma: Vec<SigmaRow>,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn level_str(level: Option<usize>) -> String {
    level.map_or_else(|| "all".to_string(), |l| l.to_string())
}

fn parse_level(s: &str) -> Result<Option<usize>, EvalError> {
    if s == "all" {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| EvalError::BadTable(format!("bad level {s:?}")))
}

fn csv_bytes<const N: usize>(header: [&str; N], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

impl ResultTable {
    /// Fills `aggregates`, `source_means` and `subset_sigma` from `cells`.
    pub fn aggregate(mut self) -> Result<Self, EvalError> {
        if self.cells.is_empty() {
            return Err(EvalError::EmptyTable);
        }
        let mut groups: BTreeMap<(&str, MetricId, Strategy), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        let mut by_level: BTreeMap<(MetricId, Option<usize>), Vec<f64>> = BTreeMap::new();
        for c in &self.cells {
            let g = groups.entry((c.source.as_str(), c.metric, c.strategy)).or_default();
            g.0.push(c.tau_w);
            g.1.push(c.tau);
            by_level.entry((c.metric, c.level)).or_default().push(c.tau_w);
        }
        self.aggregates = groups
            .iter()
            .map(|(&(source, metric, strategy), (tw, t))| AggregateRow {
                source: source.to_string(),
                metric,
                strategy,
                n_cells: tw.len(),
                mean_tau_w: mean(tw),
                mean_tau: mean(t),
            })
            .collect();

        let mut overall: BTreeMap<(MetricId, Strategy), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for row in &self.aggregates {
            let o = overall.entry((row.metric, row.strategy)).or_default();
            o.0.push(row.mean_tau_w);
            o.1.push(row.mean_tau);
        }
        self.source_means = overall
            .into_iter()
            .map(|((metric, strategy), (tw, t))| SourceMeanRow {
                metric,
                strategy,
                n_sources: tw.len(),
                mean_tau_w: mean(&tw),
                mean_tau: mean(&t),
            })
            .collect();

        let mut per_metric: BTreeMap<MetricId, Vec<f64>> = BTreeMap::new();
        for ((metric, _), values) in &by_level {
            per_metric.entry(*metric).or_default().push(mean(values));
        }
        self.subset_sigma = per_metric
            .into_iter()
            .map(|(metric, level_means)| {
                let mu = mean(&level_means);
                let var = level_means.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / level_means.len() as f64;
                SigmaRow { metric, n_levels: level_means.len(), sigma: var.sqrt() }
            })
            .collect();
        Ok(self)
    }

    pub fn cells_csv(&self) -> String {
        csv_bytes(
            CELLS_HEADER,
            self.cells.iter().map(|c| {
                vec![
                    c.source.clone(),
                    c.target.clone(),
                    c.metric.to_string(),
                    c.strategy.to_string(),
                    level_str(c.level),
                    c.n_models.to_string(),
                    c.tau_w.to_string(),
                    c.tau.to_string(),
                ]
            }),
        )
    }

    pub fn scores_csv(&self) -> String {
        csv_bytes(
            SCORES_HEADER,
            self.cells.iter().flat_map(|c| {
                c.entries.iter().map(move |e| {
                    vec![
                        c.source.clone(),
                        c.target.clone(),
                        c.metric.to_string(),
                        c.strategy.to_string(),
                        level_str(c.level),
                        e.model_id.clone(),
                        e.score.to_string(),
                        e.ground_truth.to_string(),
                    ]
                })
            }),
        )
    }

    pub fn aggregates_csv(&self) -> String {
        let per_source = self.aggregates.iter().map(|a| {
            vec![
                "source".to_string(),
                a.source.clone(),
                a.metric.to_string(),
                a.strategy.to_string(),
                a.n_cells.to_string(),
                a.mean_tau_w.to_string(),
                a.mean_tau.to_string(),
            ]
        });
        let overall = self.source_means.iter().map(|m| {
            vec![
                "overall".to_string(),
                String::new(),
                m.metric.to_string(),
                m.strategy.to_string(),
                m.n_sources.to_string(),
                m.mean_tau_w.to_string(),
                m.mean_tau.to_string(),
            ]
        });
        csv_bytes(AGGREGATES_HEADER, per_source.chain(overall))
    }

    pub fn sigma_csv(&self) -> String {
        csv_bytes(
            SIGMA_HEADER,
            self.subset_sigma.iter().map(|s| vec![s.metric.to_string(), s.n_levels.to_string(), s.sigma.to_string()]),
        )
    }

    /// One line per absent cell, in the same order as the cells.
    pub fn warnings_txt(&self) -> String {
        let mut out = String::new();
        for a in &self.absent {
            writeln!(
                out,
                "absent source={} target={} metric={} strategy={} level={} reason={}",
                a.source,
                a.target,
                a.metric,
                a.strategy,
                level_str(a.level),
                a.reason
            )
            .unwrap();
        }
        out
    }

    /// Reads back the files written by [`cells_csv`](Self::cells_csv),
    /// [`scores_csv`](Self::scores_csv) and [`warnings_txt`](Self::warnings_txt).
    pub fn from_outputs(cells_csv: &str, scores_csv: Option<&str>, warnings: &str) -> Result<Self, EvalError> {
        let bad = |e: &dyn std::fmt::Display| EvalError::BadTable(e.to_string());
        let mut table = ResultTable::default();
        let mut rdr = csv::Reader::from_reader(cells_csv.as_bytes());
        if rdr.headers().map_err(|e| bad(&e))?.iter().ne(CELLS_HEADER) {
            return Err(EvalError::BadTable(format!("cells header must be {}", CELLS_HEADER.join(","))));
        }
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(&e))?;
            let num = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(&e));
            table.cells.push(Cell {
                source: rec[0].to_string(),
                target: rec[1].to_string(),
                metric: rec[2].parse().map_err(|e| bad(&e))?,
                strategy: rec[3].parse().map_err(|e| bad(&e))?,
                level: parse_level(&rec[4])?,
                n_models: rec[5].parse().map_err(|e| bad(&e))?,
                tau_w: num(6)?,
                tau: num(7)?,
                entries: Vec::new(),
            });
        }
        if let Some(scores) = scores_csv {
            let mut rdr = csv::Reader::from_reader(scores.as_bytes());
            if rdr.headers().map_err(|e| bad(&e))?.iter().ne(SCORES_HEADER) {
                return Err(EvalError::BadTable(format!("scores header must be {}", SCORES_HEADER.join(","))));
            }
            for rec in rdr.records() {
                let rec = rec.map_err(|e| bad(&e))?;
                let metric: MetricId = rec[2].parse().map_err(|e| bad(&e))?;
                let strategy: Strategy = rec[3].parse().map_err(|e| bad(&e))?;
                let level = parse_level(&rec[4])?;
                let cell = table
                    .cells
                    .iter_mut()
                    .find(|c| {
                        c.source == rec[0]
                            && c.target == rec[1]
                            && c.metric == metric
                            && c.strategy == strategy
                            && c.level == level
                    })
                    .ok_or_else(|| EvalError::BadTable(format!("score row for unknown cell: {:?}", rec)))?;
                cell.entries.push(CellEntry {
                    model_id: rec[5].to_string(),
                    score: rec[6].parse().map_err(|e| bad(&e))?,
                    ground_truth: rec[7].parse().map_err(|e| bad(&e))?,
                });
            }
        }
        for line in warnings.lines().filter(|l| !l.trim().is_empty()) {
            table.absent.push(parse_warning(line)?);
        }
        Ok(table)
    }

    /// Markdown tables of `tau_w`: one per (metric, strategy, level) with
    /// sources as rows and targets as columns, then the per-source means and
    /// the spread across complexity levels.
    pub fn report_md(&self) -> String {
        let targets: BTreeSet<&str> =
            self.cells.iter().map(|c| c.target.as_str()).chain(self.absent.iter().map(|a| a.target.as_str())).collect();
        let sources: BTreeSet<&str> =
            self.cells.iter().map(|c| c.source.as_str()).chain(self.absent.iter().map(|a| a.source.as_str())).collect();
        let mut sections: BTreeSet<(MetricId, Strategy, Option<usize>)> = BTreeSet::new();
        sections.extend(self.cells.iter().map(|c| (c.metric, c.strategy, c.level)));
        sections.extend(self.absent.iter().map(|a| (a.metric, a.strategy, a.level)));
        let present: BTreeMap<(&str, &str, MetricId, Strategy, Option<usize>), f64> = self
            .cells
            .iter()
            .map(|c| ((c.source.as_str(), c.target.as_str(), c.metric, c.strategy, c.level), c.tau_w))
            .collect();

        let mut out = String::new();
        out.push_str("# Transferability report\n\n");
        out.push_str(
            "Weighted Kendall's tau between each score and the ground-truth accuracy. \
             Rows are source datasets and columns are target datasets. \
             `-` marks source = target and `n/a` a cell with fewer than 2 models.\n",
        );
        for &(metric, strategy, level) in &sections {
            let level_name = level.map_or_else(|| "all models".to_string(), |l| format!("complexity level {l}"));
            write!(out, "\n## {metric}, {strategy}, {level_name}\n\n| Source |").unwrap();
            for t in &targets {
                write!(out, " {t} |").unwrap();
            }
            out.push_str(" Average |\n| --- |");
            for _ in 0..=targets.len() {
                out.push_str(" ---: |");
            }
            out.push('\n');
            for &s in &sources {
                write!(out, "| {s} |").unwrap();
                let mut row = Vec::new();
                for &t in &targets {
                    match present.get(&(s, t, metric, strategy, level)) {
                        Some(v) => {
                            row.push(*v);
                            write!(out, " {v:.3} |").unwrap();
                        }
                        None if s == t => out.push_str(" - |"),
                        None => out.push_str(" n/a |"),
                    }
                }
                if row.is_empty() {
                    out.push_str(" n/a |\n");
                } else {
                    writeln!(out, " {:.3} |", mean(&row)).unwrap();
                }
            }
        }

        if !self.aggregates.is_empty() {
            let metrics: BTreeSet<MetricId> = self.aggregates.iter().map(|a| a.metric).collect();
            let strategies: BTreeSet<Strategy> = self.aggregates.iter().map(|a| a.strategy).collect();
            for strategy in strategies {
                write!(out, "\n## Mean tau_w per source, {strategy}\n\n| Source |").unwrap();
                for m in &metrics {
                    write!(out, " {m} |").unwrap();
                }
                out.push_str("\n| --- |");
                for _ in &metrics {
                    out.push_str(" ---: |");
                }
                out.push('\n');
                let agg_sources: BTreeSet<&str> = self.aggregates.iter().map(|a| a.source.as_str()).collect();
                for s in agg_sources {
                    write!(out, "| {s} |").unwrap();
                    for &m in &metrics {
                        match self.aggregates.iter().find(|a| a.source == s && a.metric == m && a.strategy == strategy)
                        {
                            Some(a) => write!(out, " {:.3} |", a.mean_tau_w).unwrap(),
                            None => out.push_str(" n/a |"),
                        }
                    }
                    out.push('\n');
                }
                out.push_str("| Average |");
                for &m in &metrics {
                    match self.source_means.iter().find(|r| r.metric == m && r.strategy == strategy) {
                        Some(r) => write!(out, " {:.3} |", r.mean_tau_w).unwrap(),
                        None => out.push_str(" n/a |"),
                    }
                }
                out.push('\n');
            }
        }

        if !self.subset_sigma.is_empty() {
            out.push_str(
                "\n## Spread across complexity levels\n\n| Metric | Levels | sigma |\n| --- | ---: | ---: |\n",
            );
            for s in &self.subset_sigma {
                writeln!(out, "| {} | {} | {:.4} |", s.metric, s.n_levels, s.sigma).unwrap();
            }
        }
        out
    }
}

fn parse_warning(line: &str) -> Result<AbsentCell, EvalError> {
    let bad = || EvalError::BadTable(format!("unreadable warning line {line:?}"));
    let rest = line.strip_prefix("absent ").ok_or_else(bad)?;
    let (fields, reason) = rest.split_once(" reason=").ok_or_else(bad)?;
    let mut kv = BTreeMap::new();
    for part in fields.split(' ') {
        let (k, v) = part.split_once('=').ok_or_else(bad)?;
        kv.insert(k, v);
    }
    let get = |k: &str| kv.get(k).copied().ok_or_else(bad);
    Ok(AbsentCell {
        source: get("source")?.to_string(),
        target: get("target")?.to_string(),
        metric: get("metric")?.parse().map_err(|_| bad())?,
        strategy: get("strategy")?.parse().map_err(|_| bad())?,
        level: parse_level(get("level")?)?,
        reason: reason.to_string(),
    })
}
