//! Command-line front end. The `vcsel-rul` binary is a thin wrapper around
//! [`main_with_args`].
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 I/O error,
//! 4 numerical failure during training.

mod commands;
mod compare;
mod manifest;

pub use compare::{compare, Comparison, ComparisonRow};
pub use manifest::{file_digest, RunManifest, MANIFEST_FILE};

use std::ffi::OsString;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::experiment::ExperimentConfig;
use crate::model::{Variant, TrainError};
use crate::tensor::OptimizerKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const LOSS_HISTORY_FILE: &str = "loss_history.csv";
pub const COMPARISON_TEXT_FILE: &str = "comparison.txt";
pub const COMPARISON_JSON_FILE: &str = "comparison.json";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub(crate) fn io(path: &Path, e: io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<crate::synth::SynthError> for CliError {
    fn from(e: crate::synth::SynthError) -> Self {
        match e {
            crate::synth::SynthError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<crate::dataset::DatasetError> for CliError {
    fn from(e: crate::dataset::DatasetError) -> Self {
        match e {
            crate::dataset::DatasetError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<crate::model::CheckpointError> for CliError {
    fn from(e: crate::model::CheckpointError) -> Self {
        match e {
            crate::model::CheckpointError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<crate::model::ModelError> for CliError {
    fn from(e: crate::model::ModelError) -> Self {
        match e {
            crate::model::ModelError::Engine(crate::tensor::EngineError::NonFinite(_)) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NumericalFailure { .. } => CliError::Numerical(e.to_string()),
            TrainError::Model(m) => m.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<crate::llsf::LlsfError> for CliError {
    fn from(e: crate::llsf::LlsfError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<crate::metrics::MetricsError> for CliError {
    fn from(e: crate::metrics::MetricsError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<crate::experiment::ExperimentError> for CliError {
    fn from(e: crate::experiment::ExperimentError) -> Self {
        use crate::experiment::ExperimentError as E;
        match e {
            E::Synth(e) => e.into(),
            E::Dataset(e) => e.into(),
            E::Model(e) => e.into(),
            E::Train(e) => e.into(),
            E::Llsf(e) => e.into(),
            E::Metrics(e) => e.into(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "vcsel-rul", version, about = "Remaining-useful-life experiments on synthetic laser aging data")]
pub struct Cli {
    /// Master seed; overrides every seed in the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (each subcommand has its own default).
    #[arg(short = 'o', long, global = true)]
    pub out: Option<PathBuf>,
    /// TOML experiment config; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overwrite a non-empty output directory.
    #[arg(long, global = true)]
    pub force: bool,
    /// Suppress progress and summary output.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an aging fleet: fleet.csv + conditions.csv.
    Generate(GenerateArgs),
    /// Window, label and split a fleet: dataset.jsonl + stats.json + split.json.
    BuildDataset(BuildDatasetArgs),
    /// Train a model variant: model.ckpt + loss_history.csv.
    Train(TrainArgs),
    /// Score a checkpoint or the least-squares baseline on the test split.
    Evaluate(EvaluateArgs),
    /// Side-by-side table of two or more report.json files.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub devices: Option<usize>,
    #[arg(long)]
    pub interval_h: Option<f64>,
    #[arg(long)]
    pub max_hours: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BuildDatasetArgs {
    /// Directory written by `generate`.
    #[arg(long)]
    pub fleet: PathBuf,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory written by `build-dataset`.
    #[arg(long)]
    pub dataset: PathBuf,
    /// hybrid, cnn-only, lstm-only or mlp.
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// sgd or adam.
    #[arg(long, value_parser = parse_optimizer)]
    pub optimizer: Option<OptimizerKind>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Baseline {
    Llsf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory written by `build-dataset`.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Checkpoint written by `train`.
    #[arg(long, required_unless_present = "baseline", conflicts_with = "baseline")]
    pub checkpoint: Option<PathBuf>,
    /// Evaluate a baseline instead of a checkpoint.
    #[arg(long, value_enum, requires = "fleet")]
    pub baseline: Option<Baseline>,
    /// Fleet directory, needed by the baseline for full device histories.
    #[arg(long)]
    pub fleet: Option<PathBuf>,
    /// Also write trajectory_<id>.csv for this device.
    #[arg(long)]
    pub device: Option<String>,
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// report.json files or directories containing one.
    #[arg(required = true, num_args = 2..)]
    pub reports: Vec<PathBuf>,
    /// Method name of the reference row (default: the first report).
    #[arg(long)]
    pub reference: Option<String>,
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind, String> {
    match s {
        "sgd" => Ok(OptimizerKind::Sgd),
        "adam" => Ok(OptimizerKind::Adam),
        _ => Err(format!("unknown optimizer {s:?} (expected sgd or adam)")),
    }
}

/// Global settings shared by every subcommand.
pub(crate) struct Context {
    pub config: ExperimentConfig,
    pub seed_flag: Option<u64>,
    pub out: PathBuf,
    pub force: bool,
    pub quiet: bool,
}

impl Context {
    pub fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    /// Creates the output directory, refusing to reuse a non-empty one
    /// unless `--force` was given.
    pub fn prepare_out(&self) -> Result<(), CliError> {
        let dir = &self.out;
        if dir.exists() {
            if !dir.is_dir() {
                return Err(CliError::Usage(format!("output path {} is not a directory", dir.display())));
            }
            let mut entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
            if entries.next().is_some() && !self.force {
                return Err(CliError::Usage(format!(
                    "output directory {} is not empty; pass --force to overwrite",
                    dir.display()
                )));
            }
        }
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
    }
}

pub(crate) fn require_exists(path: &Path, what: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} not found: {}", path.display())))
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, CliError> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::default());
    };
    require_exists(path, "config file")?;
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn default_out(command: &Command) -> &'static str {
    match command {
        Command::Generate(_) => "fleet",
        Command::BuildDataset(_) => "dataset",
        Command::Train(_) => "model",
        Command::Evaluate(_) => "eval",
        Command::Compare(_) => "compare",
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.set_seed(seed);
    }
    let ctx = Context {
        config,
        seed_flag: cli.seed,
        out: cli.out.unwrap_or_else(|| PathBuf::from(default_out(&cli.command))),
        force: cli.force,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Generate(a) => commands::generate(ctx, a),
        Command::BuildDataset(a) => commands::build_dataset(ctx, a),
        Command::Train(a) => commands::train(ctx, a),
        Command::Evaluate(a) => commands::evaluate(ctx, a),
        Command::Compare(a) => commands::compare(ctx, a),
    }
}

/// Parses `args` (including the program name), runs, reports errors on
/// stderr and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
