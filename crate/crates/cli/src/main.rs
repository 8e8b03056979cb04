use clap::{Args, Parser, Subcommand};
use imcf_cli::{execute, thread_count, CliError, Command, CommonOptions, THREADS_ENV};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "imcf", version, about = "Inverse mean curvature flow of spacelike graphs")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file
    config: PathBuf,
    /// Overrides `output.dir`
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Overrides `checks.seed`
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Sub {
    /// Flow the initial data and write the trace, snapshots and trace checks
    Run(Common),
    /// Run the model-level condition checkers
    Check(Common),
    /// Compare the PDE with the homogeneous ODE reference
    OracleCompare(Common),
    /// Check the remaining-lifetime bound at flow time `--t`
    Lifespan {
        #[command(flatten)]
        common: Common,
        #[arg(long = "t")]
        t: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Run(c) => (Command::Run, c),
        Sub::Check(c) => (Command::Check, c),
        Sub::OracleCompare(c) => (Command::OracleCompare, c),
        Sub::Lifespan { common, t } => (Command::Lifespan { t }, common),
    };
    let opts = CommonOptions { output_dir: common.output_dir, seed: common.seed, quiet: common.quiet };
    let result = configure_threads().and_then(|_| execute(command, &common.config, &opts));
    match result {
        Ok(outcome) => {
            if !opts.quiet {
                for line in &outcome.summary {
                    println!("{line}");
                }
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let value = std::env::var(THREADS_ENV).ok();
    if let Some(n) = thread_count(value.as_deref())? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))?;
    }
    Ok(())
}
