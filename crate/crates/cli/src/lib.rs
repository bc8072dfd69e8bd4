//! The `mcwd` command line.
//!
//! Output directory precedence: `--out`, then `out` in the config file, then
//! `MCWD_OUT_DIR`, then the working directory. `--seed` overrides the config
//! seed, which in turn overrides the per-command seeds (`bench.master_seed`,
//! `estimate.estimator.probe_seed`).
//!
//! Exit codes: 0 success, 1 validation, 2 runtime, 3 trend assertion failure.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, CliResult};

pub const OUT_DIR_ENV: &str = "MCWD_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "mcwd", version, about = "Multichannel wavelet deconvolution with long-memory noise")]
pub struct Cli {
    #[command(flatten)]
    pub shared: SharedArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SharedArgs {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for replicated experiments.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Exit with status 3 if any benchmark trend check fails.
    #[arg(long, global = true)]
    pub assert_trends: bool,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Simulate a multichannel observation: truth.txt, observation.txt, metadata.json.
    Simulate,
    /// Estimate the signal from stored data: reconstruction.txt, report.json.
    Estimate {
        #[arg(long)]
        observation: Option<PathBuf>,
        #[arg(long)]
        metadata: Option<PathBuf>,
    },
    /// Run a benchmark grid: bench.csv, bench.md, bench_long.csv, trends.csv.
    Bench,
    /// Meyer transform of a signal file (coefficients.csv), or the inverse (inverse.txt).
    Transform {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        j0: Option<u32>,
        #[arg(long)]
        j1: Option<u32>,
        #[arg(long)]
        inverse: bool,
    },
    /// Write the test signals as two-column files.
    Signals {
        #[arg(long)]
        n: Option<usize>,
    },
}
