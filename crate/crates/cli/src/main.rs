//! `qrobust`: config-driven data preparation, training, attack sweeps and certification.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qrobust::ErrorCategory;

use crate::commands::{cmd_certify, cmd_data, cmd_sweep, cmd_train, output_dir, Context};
use crate::config::ExperimentConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(qrobust::Error),
}

impl From<qrobust::Error> for CliError {
    fn from(e: qrobust::Error) -> Self {
        CliError::Core(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Core(e) => match e.category() {
                ErrorCategory::Config => write!(f, "config error: {e}"),
                ErrorCategory::Data => write!(f, "data error: {e}"),
                ErrorCategory::Numeric => write!(f, "numeric failure: {e}"),
            },
        }
    }
}

impl CliError {
    /// 1 config error, 2 data error, 3 numeric failure.
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Core(e) => match e.category() {
                ErrorCategory::Config => 1,
                ErrorCategory::Data => 2,
                ErrorCategory::Numeric => 3,
            },
        }
    }
}

#[derive(Parser)]
#[command(name = "qrobust", version, about = "Noisy quantum classifier experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel evaluation.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Replaces every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Subcommand)]
enum Command {
    /// Load the dataset and print counts, dimension, splits and domain.
    Data,
    /// Train a classifier; writes a checkpoint and the loss history.
    Train,
    /// Adversarial accuracy over the epsilon × noise grid.
    Sweep,
    /// Per-sample certificates and the mean certified distance per p.
    Certify,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.override_seed(seed);
    }
    config.validate()?;
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be ≥ 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    }
    let config_dir = path.parent().map(PathBuf::from).unwrap_or_default();
    let out_dir = output_dir(cli.out.as_deref(), &config, &config_dir);
    if !matches!(cli.command, Command::Data) {
        std::fs::create_dir_all(&out_dir)
            .map_err(|e| CliError::Core(qrobust::Error::io(&out_dir, e)))?;
    }
    let ctx = Context { config, config_dir, out_dir };
    match cli.command {
        Command::Data => cmd_data(&ctx),
        Command::Train => cmd_train(&ctx),
        Command::Sweep => cmd_sweep(&ctx),
        Command::Certify => cmd_certify(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qrobust: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
