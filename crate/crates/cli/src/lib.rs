//! Command-line front end: scoring, evaluation, synthetic hubs, reports and
//! manifest validation.
//!
//! Exit codes: 0 on success, 2 when the inputs are invalid, 3 when a
//! computation fails on valid inputs.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use xferbench_core::harness::{
    run_experiment, score_model, EvalError, ExperimentSpec, MetricParams, ResultTable, ScoreError,
};
use xferbench_core::metrics::{MetricId, ScoreValue};
use xferbench_core::synth::{gen_hub, HubConfig, SynthError};
use xferbench_core::tensor_io::{load_ground_truth, load_hub, Strategy};

pub const SCORE_HEADER: &str = "model_id,metric,strategy,score";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Compute(_) => 3,
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Compute(e.to_string())
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Input(e.to_string())
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "xferbench", version, about = "Rank pre-trained models by transferability and benchmark the rankings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every model of a hub on one target dataset
    Score(ScoreArgs),
    /// Run an experiment spec and write rank-correlation tables
    Evaluate(EvaluateArgs),
    /// Generate a synthetic hub with known ground truth
    Synth(SynthArgs),
    /// Rebuild report.md from an evaluate output directory
    Report(ReportArgs),
    /// Load and check a manifest and every tensor it references
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub target: String,
    #[arg(long)]
    pub metric: MetricId,
    #[arg(long, default_value = "head")]
    pub strategy: Strategy,
    /// Metric parameters as inline JSON, e.g. '{"lr": 0.02}'
    #[arg(long)]
    pub params: Option<String>,
    /// Seed for the drift metrics' probe training
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output CSV; standard output when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "XFERBENCH_JOBS")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// Overrides the seed in the experiment spec
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "XFERBENCH_JOBS")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub models: usize,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub s_low: f64,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    pub s_high: f64,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_samples: usize,
    /// Head noise of the most separable model
    #[arg(long, default_value_t = HubConfig::default().noise_base)]
    pub noise_base: f64,
    /// Extra head noise of the least separable model
    #[arg(long, default_value_t = HubConfig::default().noise_slope)]
    pub noise_slope: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory written by `evaluate`
    #[arg(long)]
    pub input: PathBuf,
    /// Accepted for uniformity; reports involve no randomness
    #[arg(long)]
    pub seed: Option<u64>,
    /// Defaults to report.md inside the input directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Accepted for uniformity; validation involves no randomness
    #[arg(long)]
    pub seed: Option<u64>,
    /// Summary file; standard output when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Score(a) => cmd_score(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Report(a) => cmd_report(&a),
        Command::Validate(a) => cmd_validate(&a),
    }
}

fn jobs(requested: Option<usize>) -> Result<usize, CliError> {
    match requested {
        Some(0) => Err(CliError::Input("--jobs must be at least 1".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn score_error(e: ScoreError, model: &str) -> CliError {
    let msg = format!("model {model:?}: {e}");
    if e.is_input_error() {
        CliError::Input(msg)
    } else {
        CliError::Compute(msg)
    }
}

/// Rows of `model_id,metric,strategy,score`, best first; ties by model id.
pub fn format_scores(scores: &[ScoreValue]) -> String {
    let mut sorted: Vec<&ScoreValue> = scores.iter().collect();
    sorted.sort_by(|a, b| b.value.total_cmp(&a.value).then_with(|| a.model_id.cmp(&b.model_id)));
    let mut out = String::from(SCORE_HEADER);
    out.push('\n');
    for s in sorted {
        out.push_str(&format!("{},{},{},{}\n", s.model_id, s.metric, s.strategy, s.value));
    }
    out
}

pub fn cmd_score(a: &ScoreArgs) -> Result<(), CliError> {
    let params: MetricParams = match &a.params {
        Some(text) => serde_json::from_str(text).map_err(|e| CliError::Input(format!("--params: {e}")))?,
        None => MetricParams::default(),
    };
    params.validate()?;
    let workers = jobs(a.jobs)?;
    let hub = load_hub(&a.manifest).map_err(input)?;
    let models: Vec<&str> = hub
        .models()
        .iter()
        .filter(|m| hub.feature_set(&m.model_id, &a.target).is_some())
        .map(|m| m.model_id.as_str())
        .collect();
    if models.is_empty() {
        return Err(CliError::Input(format!("no model has features for target {:?}", a.target)));
    }
    let pool = rayon_pool(workers)?;
    let results: Vec<_> = pool.install(|| {
        use rayon::prelude::*;
        models.par_iter().map(|m| score_model(&hub, m, &a.target, a.metric, a.strategy, &params, a.seed)).collect()
    });
    let mut scores = Vec::with_capacity(results.len());
    for (m, r) in models.iter().zip(results) {
        scores.push(r.map_err(|e| score_error(e, m))?);
    }
    emit(a.out.as_deref(), &format_scores(&scores))
}

fn rayon_pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Compute(format!("cannot start {workers} workers: {e}")))
}

/// Writes every evaluate output file for `table` into `dir`.
pub fn write_outputs(table: &ResultTable, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    write_file(&dir.join("cells.csv"), &table.cells_csv())?;
    write_file(&dir.join("scores.csv"), &table.scores_csv())?;
    write_file(&dir.join("aggregates.csv"), &table.aggregates_csv())?;
    write_file(&dir.join("sigma.csv"), &table.sigma_csv())?;
    write_file(&dir.join("warnings.txt"), &table.warnings_txt())?;
    write_file(&dir.join("report.md"), &table.report_md())
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.spec).map_err(|e| CliError::Input(format!("{}: {e}", a.spec.display())))?;
    let mut spec = ExperimentSpec::from_json(&text)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let workers = jobs(a.jobs)?;
    let hub = load_hub(&a.manifest).map_err(input)?;
    let gt = load_ground_truth(&a.ground_truth).map_err(input)?;
    let table = run_experiment(&spec, &hub, &gt, workers)?;
    write_outputs(&table, &a.out)?;
    let absent = table.absent.iter().filter(|c| !c.is_diagonal()).count();
    if absent > 0 {
        eprintln!("warning: {absent} cells absent; see {}", a.out.join("warnings.txt").display());
    }
    Ok(())
}

pub fn cmd_synth(a: &SynthArgs) -> Result<(), CliError> {
    let cfg = HubConfig {
        seed: a.seed,
        n_models: a.models,
        s_low: a.s_low,
        s_high: a.s_high,
        classes: a.classes,
        dim: a.dim,
        n_samples: a.n_samples,
        noise_base: a.noise_base,
        noise_slope: a.noise_slope,
        ..HubConfig::default()
    };
    // reject bad ranges before touching the output directory
    cfg.model_specs()?;
    let (manifest, _) = gen_hub(&cfg, &a.out)?;
    log::info!("wrote {} models to {}", manifest.models.len(), a.out.display());
    Ok(())
}

pub fn cmd_report(a: &ReportArgs) -> Result<(), CliError> {
    let read = |name: &str| fs::read_to_string(a.input.join(name));
    let cells =
        read("cells.csv").map_err(|e| CliError::Input(format!("{}: {e}", a.input.join("cells.csv").display())))?;
    let scores = read("scores.csv").ok();
    let warnings = read("warnings.txt").unwrap_or_default();
    let mut table = ResultTable::from_outputs(&cells, scores.as_deref(), &warnings)?;
    if !table.cells.is_empty() {
        table = table.aggregate()?;
    }
    let out = a.out.clone().unwrap_or_else(|| a.input.join("report.md"));
    write_file(&out, &table.report_md())
}

pub fn cmd_validate(a: &ValidateArgs) -> Result<(), CliError> {
    let hub = load_hub(&a.manifest).map_err(input)?;
    let mut out = String::new();
    for m in hub.models() {
        let datasets: Vec<String> = m
            .feature_paths
            .keys()
            .map(|d| {
                let fs = hub.feature_set(&m.model_id, d).expect("loaded with the hub");
                let labels = if fs.labels().is_some() { "labeled" } else { "unlabeled" };
                format!("{d}[N={} D={} C_s={} {labels}]", fs.n(), fs.dim(), fs.source_classes())
            })
            .collect();
        out.push_str(&format!(
            "{}: source={} params={} head={} snapshots={} datasets={}\n",
            m.model_id,
            m.source_dataset,
            m.param_count,
            if hub.head(&m.model_id).is_some() { "yes" } else { "no" },
            m.snapshot_paths.len(),
            datasets.join(",")
        ));
    }
    out.push_str(&format!("ok: {} models, {} feature sets\n", hub.models().len(), hub.feature_set_count()));
    emit(a.out.as_deref(), &out)
}
