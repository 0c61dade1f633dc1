//! `vqdyn`: run variational adiabatic-evolution experiments from config files.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid configuration, input or
//! existing outputs, 3 numerical abort. Failures print a JSON error record
//! on stderr.

mod commands;
mod config;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Exists(String),
    Artifact(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Exists(_) => "exists",
            CliError::Artifact(_) => "artifact",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Exists(m) | CliError::Artifact(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Exists(_) | CliError::Artifact(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    status: &'static str,
    kind: &'static str,
    exit_code: u8,
    message: &'a str,
}

#[derive(Debug, Parser)]
#[command(name = "vqdyn", version, about = "Variational adiabatic state preparation on Ising chains")]
struct Cli {
    /// Overrides the estimator seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Runs an experiment and writes trajectories, spectrum and summary.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config and $VQDYN_OUTPUT_ROOT).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Tabulates the grid database for a two-parameter ansatz.
    Grid {
        config: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Writes plot data files into a finished run directory.
    Report { dir: PathBuf },
}

fn load(path: &Path, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = seed {
        config.estimator.seed = seed;
    }
    Ok(config)
}

fn execute(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::Run { config, out } => {
            let c = load(config, cli.seed)?;
            let dir = out.clone().unwrap_or_else(|| c.output_dir(config));
            commands::cmd_run(&c, &dir, cli.force)
        }
        Command::Grid { config, out } => {
            let c = load(config, cli.seed)?;
            let dir = out.clone().unwrap_or_else(|| c.output_dir(config));
            commands::cmd_grid(&c, &dir, cli.force)
        }
        Command::Report { dir } => report::cmd_report(dir, cli.force),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let record = ErrorRecord {
                status: "error",
                kind: e.kind(),
                exit_code: e.exit_code(),
                message: e.message(),
            };
            eprintln!("{}", serde_json::to_string(&record).expect("error record serializes"));
            ExitCode::from(e.exit_code())
        }
    }
}
