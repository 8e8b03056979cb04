//! Batch front end for the `imcf` simulator: configuration, subcommands, output files.

pub mod commands;
pub mod config;
pub mod output;
mod schema;

pub use config::{parse_config, parse_config_str, parse_config_with, ConfigError, RunConfig};

use imcf_core::ImcfError;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_PRECONDITION: i32 = 4;

/// Environment variable holding the worker thread count of the parallel kernels.
pub const THREADS_ENV: &str = "IMCF_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] ImcfError),
    #[error(transparent)]
    Write(#[from] output::WriteError),
    #[error("usage: {0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Write(_) => EXIT_CONFIG,
            CliError::Core(e) if e.is_precondition() => EXIT_PRECONDITION,
            CliError::Core(_) => EXIT_NUMERICAL,
        }
    }
}

/// Result of a subcommand that ran to completion.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    /// Human-readable lines for the terminal.
    pub summary: Vec<String>,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Command {
    Run,
    Check,
    OracleCompare,
    Lifespan { t: f64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommonOptions {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub quiet: bool,
}

/// Loads `config` and runs `command`; errors carry their exit code.
pub fn execute(command: Command, config: &Path, opts: &CommonOptions) -> Result<Outcome, CliError> {
    let cfg = parse_config_with(config, opts.seed)?;
    let out = opts.output_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
    match command {
        Command::Run => commands::cmd_run(&cfg, &out),
        Command::Check => commands::cmd_check(&cfg, &out),
        Command::OracleCompare => commands::cmd_oracle_compare(&cfg, &out),
        Command::Lifespan { t } => commands::cmd_lifespan(&cfg, &out, t),
    }
}

/// Parses a thread-count setting; `None` leaves the pool at its default size.
pub fn thread_count(value: Option<&str>) -> Result<Option<usize>, CliError> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(s) => match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got '{s}'"))),
        },
    }
}
