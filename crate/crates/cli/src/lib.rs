//! The `catstream` command line: dataset generation, training, scoring,
//! evaluation, block-size sweeps and ablation runs. Every command writes its
//! effective configuration to `config.txt` in its output directory.

pub mod ablate;
pub mod eval;
mod gen_data;
mod io;
pub mod run_config;
mod score;
mod train;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use catstream_core::config::ConfigError;
use catstream_core::data::DataError;
use catstream_core::{CheckpointError, Error, EvalError, ModelError};

pub use run_config::RunConfig;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_EVAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

macro_rules! via_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}
via_core!(ConfigError, DataError, ModelError, CheckpointError, EvalError);

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => EXIT_DATA,
            CliError::Core(e) => match e {
                Error::Config(_) | Error::Data(DataError::Config(_)) => EXIT_CONFIG,
                Error::Data(_) => EXIT_DATA,
                Error::Model(ModelError::Config(_)) => EXIT_CONFIG,
                Error::Model(_) => EXIT_DATA,
                Error::Checkpoint(CheckpointError::Mismatch(_)) => EXIT_CONFIG,
                Error::Checkpoint(_) => EXIT_DATA,
                Error::Eval(_) => EXIT_EVAL,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "catstream", version, about = "Anomaly detection on streams of categorical records")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command.
#[derive(Debug, Args)]
pub struct Common {
    /// key=value configuration file, applied before the other flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set beta=0.5`. Applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset with train/test split and injected anomalies.
    GenData(gen_data::GenDataArgs),
    /// Train a model and write a checkpoint plus the per-block loss log.
    Train(train::TrainArgs),
    /// Score a test stream at instance and block level.
    Score(score::ScoreArgs),
    /// AUROC, optimal threshold, accuracy and F1-macro of a score file.
    Eval(eval::EvalArgs),
    /// Block-level AUROC as a function of the scoring block size.
    Sweep(score::SweepArgs),
    /// Train and score the full model and each ablation over several seeds.
    Ablate(ablate::AblateArgs),
}

/// Builds the effective configuration: defaults, then `--config`, then the
/// command's own flags, then `--set`.
fn assemble(mut cfg: RunConfig, common: &Common, flags: Vec<(&str, String)>) -> Result<RunConfig, CliError> {
    if let Some(path) = &common.config {
        cfg.load_file(path)?;
    }
    for (k, v) in flags {
        cfg.set(k, &v)?;
    }
    if let Some(out) = &common.out {
        cfg.set("out", out)?;
    }
    cfg.apply_overrides(&common.overrides)?;
    if let Some(t) = &cfg.train {
        t.validate()?;
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData(a) => gen_data::run(a),
        Command::Train(a) => train::run(a),
        Command::Score(a) => score::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Sweep(a) => score::run_sweep(a),
        Command::Ablate(a) => ablate::run(a),
    }
}
