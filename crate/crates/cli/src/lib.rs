//! Batch front-end: `simulate`, `fit` and `evaluate`, all file based.

pub mod chain_io;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hbest_core::Mode;

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "hbest",
    version,
    about = "Hierarchical Bayesian log-spectrum estimation for replicated time series"
)]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "HBEST_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate simulated datasets with known log-spectra.
    Simulate(SimulateArgs),
    /// Run the sampler on a set of series.
    Fit(FitArgs),
    /// Summarise fits and, given truth, score them.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation setting (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Standardise every generated series.
    #[arg(long)]
    pub standardize: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Data directories (CSV files or a `series/` subdirectory) or CSV files.
    #[arg(required = true)]
    pub data: Vec<PathBuf>,
    /// Fit configuration (JSON); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the mode: hierarchical, common or independent.
    #[arg(long)]
    pub mode: Option<Mode>,
    /// CSV `series,group`: fit each group separately.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// Standardise each series before fitting.
    #[arg(long)]
    pub standardize: bool,
    /// Output directory; one subdirectory per group with --groups.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Fit output directories, optionally named as `name=path`.
    #[arg(required = true)]
    pub fits: Vec<String>,
    /// Directory holding `truth.csv`, or the file itself.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Run a parsed command line, returning the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return 2;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure thread pool: {e}");
            return 2;
        }
    }
    let argv: Vec<String> = std::env::args().collect();
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a, &argv),
        Command::Fit(a) => commands::fit(a, &argv),
        Command::Evaluate(a) => commands::evaluate(a, &argv),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
