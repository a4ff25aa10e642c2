//! The `bsa` command: one subcommand per pipeline, each a thin adapter over
//! the library crates.
//!
//! Exit codes: 0 success, 1 validation failure or runtime error, 2 usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

mod commands;
pub mod config;
mod plan;

#[derive(Debug, Parser)]
#[command(name = "bsa", version, about = "Basic surgical action toolkit")]
pub struct Cli {
    /// TOML file with defaults; flags and BSA_* variables take precedence.
    #[arg(long, global = true, env = "BSA_CONFIG")]
    pub config: Option<PathBuf>,
    /// Human-readable tables instead of JSON/CSV.
    #[arg(long, global = true)]
    pub human: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Manifest checks and fold splitting.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Train the toy video transformer on synthetic motion clips.
    Train(TrainArgs),
    /// ROC, Youden and bootstrap tables from a scores file.
    Evaluate(EvaluateArgs),
    /// Two-rater agreement statistics.
    Agree(AgreeArgs),
    /// Action barcode and skill factors from timed segments.
    Skill(SkillArgs),
    /// Next-action planning runs and scoring.
    #[command(subcommand)]
    Plan(PlanCommand),
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Check every clip of a manifest against the clip rules.
    Validate {
        /// JSON-lines manifest.
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Split videos into k folds.
    Folds {
        /// JSON-lines manifest.
        #[arg(long)]
        manifest: PathBuf,
        /// Number of folds.
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Shuffle seed [default: 0].
        #[arg(long, env = "BSA_SEED")]
        seed: Option<u64>,
        /// Write the assignment here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory for checkpoint.json, history.json and evaluation.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Initialisation and batch-order seed [default: 0].
    #[arg(long, env = "BSA_SEED")]
    pub seed: Option<u64>,
    /// Seed of the synthetic data; defaults to the training seed.
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// [default: 20]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// [default: 16]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// SGD learning rate [default: 0.005].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Loss variant: mse, log or digamma [default: mse].
    #[arg(long)]
    pub loss: Option<String>,
    /// Head composition: dual or single [default: dual].
    #[arg(long)]
    pub composition: Option<String>,
    /// Embedding width [default: 32].
    #[arg(long)]
    pub dim: Option<usize>,
    /// Encoder blocks [default: 1].
    #[arg(long)]
    pub depth: Option<usize>,
    /// Attention heads [default: 4].
    #[arg(long)]
    pub heads: Option<usize>,
    /// Patch side in pixels [default: 8].
    #[arg(long)]
    pub patch: Option<usize>,
    /// Training clips per synthetic class.
    #[arg(long)]
    pub train_per_class: Option<usize>,
    /// Held-out clips per synthetic class.
    #[arg(long)]
    pub test_per_class: Option<usize>,
    /// Also write held-out probabilities as scores.jsonl.
    #[arg(long)]
    pub scores: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Scores as JSON lines (sample_id, label, probs, optional group and fold).
    #[arg(long)]
    pub scores: PathBuf,
    /// Directory for youden.csv and the grouped bootstrap tables.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Bootstrap resamples [default: 1000].
    #[arg(long)]
    pub resamples: Option<usize>,
    /// Bootstrap seed [default: 0].
    #[arg(long, env = "BSA_SEED")]
    pub seed: Option<u64>,
    /// Statistics for the grouped tables.
    #[arg(long, value_delimiter = ',', default_value = "auroc,sensitivity,specificity,accuracy")]
    pub statistics: Vec<String>,
}

#[derive(Debug, Args)]
pub struct AgreeArgs {
    /// CSV with header `clip_id,rater_a,rater_b`.
    #[arg(long)]
    pub pairs: PathBuf,
}

#[derive(Debug, Args)]
pub struct SkillArgs {
    /// JSON lines with `action`, `start_s`, `end_s`.
    #[arg(long)]
    pub segments: PathBuf,
    /// Procedure length; defaults to the last segment end.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Attempt counting: repeat-transitions or repeated-runs.
    #[arg(long, default_value = "repeat-transitions")]
    pub rule: String,
    /// Also render the barcode to this SVG file.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum PlanCommand {
    /// Query the agent for every sliding-window sample and write a prediction log.
    Run(PlanRunArgs),
    /// Accuracy table (and optional surgeon match) from a prediction log.
    Score(PlanScoreArgs),
}

#[derive(Debug, Args)]
pub struct PlanRunArgs {
    /// Contexts as JSON lines.
    #[arg(long, conflicts_with = "synthetic")]
    pub contexts: Option<PathBuf>,
    /// Generate this many random contexts instead.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Clips per synthetic context.
    #[arg(long, default_value_t = 15)]
    pub clips: usize,
    /// Prediction log to write (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    /// Serve this in-process mock instead of calling an endpoint: ground-truth,
    /// uniform-random, malformed-then-valid, off-taxonomy or rate-limited-then-valid.
    #[arg(long)]
    pub mock: Option<String>,
    /// Chat-completion URL.
    #[arg(long, env = "BSA_ENDPOINT")]
    pub endpoint: Option<String>,
    /// Model name sent with each request [default: mock-model].
    #[arg(long, env = "BSA_MODEL")]
    pub model: Option<String>,
    /// Bearer token; never echoed or logged.
    #[arg(long, env = "BSA_API_KEY", hide_env_values = true)]
    pub api_key: Option<String>,
    /// Concurrent requests [default: 4].
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// TOML knowledge base; built-in text when absent.
    #[arg(long)]
    pub knowledge_base: Option<PathBuf>,
    /// Root for frame references; synthetic frames when absent.
    #[arg(long)]
    pub frames_dir: Option<PathBuf>,
    /// Seed for synthetic contexts and the uniform-random mock [default: 0].
    #[arg(long, env = "BSA_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PlanScoreArgs {
    /// Prediction log written by `plan run`.
    #[arg(long)]
    pub log: PathBuf,
    /// Write the CSV table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON lines `{"context_id", "t", "choices": [...]}` for the surgeon comparison.
    #[arg(long)]
    pub surgeon: Option<PathBuf>,
}

/// Bad invocation detected after parsing (missing inputs, bad combinations).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// The command ran and found invalid input; details are already printed.
#[derive(Debug)]
pub struct ValidationFailed(pub String);

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationFailed {}

pub(crate) fn require_file(path: &Path, what: &str) -> anyhow::Result<()> {
    if !path.is_file() {
        return Err(UsageError(format!("{what} `{}` does not exist", path.display())).into());
    }
    Ok(())
}

pub(crate) fn echo_config(command: &str, config: Value) {
    eprintln!("bsa {command}: effective config {config}");
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<()> {
    if let Some(p) = &cli.config {
        require_file(p, "config file")?;
    }
    let file = config::FileConfig::load(cli.config.as_deref()).map_err(|e| UsageError(format!("{e:#}")))?;
    match &cli.command {
        Command::Dataset(DatasetCommand::Validate { manifest }) => commands::dataset_validate(manifest, cli.human),
        Command::Dataset(DatasetCommand::Folds { manifest, k, seed, out }) => {
            commands::dataset_folds(manifest, *k, config::pick(*seed, file.seed, 0), out.as_deref(), cli.human)
        }
        Command::Train(args) => commands::train(args, &file, cli.human),
        Command::Evaluate(args) => commands::evaluate(args, &file, cli.human),
        Command::Agree(args) => commands::agree(args, cli.human),
        Command::Skill(args) => commands::skill(args, cli.human),
        Command::Plan(PlanCommand::Run(args)) => plan::run(args, &file, cli.human),
        Command::Plan(PlanCommand::Score(args)) => plan::score(args, cli.human),
    }
}
