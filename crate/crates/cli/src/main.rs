//! `truncfit`: batch driver for fitting polynomial log-densities from
//! truncated samples.
//!
//! Exit codes: 0 success, 1 failed verification check, 2 configuration
//! error, 3 numerical failure, 4 violated example claim.

mod artifacts;
mod commands;
mod config;
mod error;
mod targets;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{ExperimentSpec, FitArgs, DEFAULT_CURVE_RESOLUTION, MIN_CURVE_RESOLUTION};
use crate::error::{CliError, CliResult};

/// Environment variables that cap the worker thread count, in priority order.
const THREAD_VARS: [&str; 2] = ["TRUNCFIT_THREADS", "TOOL_THREADS"];

#[derive(Parser)]
#[command(
    name = "truncfit",
    version,
    about = "Fit polynomial log-densities from samples truncated to a set"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a target from samples (psgd) or from its exact moments (population).
    Fit(FitArgs),
    /// Degree sweep for sin(10x) truncated to [0, 1/2].
    #[command(name = "example-1d")]
    Example1d {
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CURVE_RESOLUTION)]
        curve_resolution: usize,
    },
    /// Run the verification suites.
    Verify {
        /// Run only the suites whose name contains this string.
        #[arg(long)]
        suite: Option<String>,
        /// Print a JSON document to stdout (the table then goes to stderr).
        #[arg(long)]
        json: bool,
    },
    /// Draw points from a target truncated to a set and write them as CSV.
    Sample {
        #[arg(long)]
        target: String,
        #[arg(long)]
        set: String,
        #[arg(short = 'n', long = "n")]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn configure_threads() -> CliResult<()> {
    for var in THREAD_VARS {
        if let Ok(value) = std::env::var(var) {
            let n: usize = value
                .trim()
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| CliError::config(format!("{var} must be a positive integer, got {value:?}")))?;
            #[cfg(feature = "parallel")]
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
            #[cfg(not(feature = "parallel"))]
            let _ = n;
            break;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Fit(args) => commands::fit::run(&ExperimentSpec::resolve(&args)?),
        Command::Example1d { out, curve_resolution } => {
            if curve_resolution < MIN_CURVE_RESOLUTION {
                return Err(CliError::config(format!(
                    "curve_resolution must be at least {MIN_CURVE_RESOLUTION}"
                )));
            }
            commands::example::run(&out, curve_resolution)
        }
        Command::Verify { suite, json } => commands::verify::run(suite.as_deref(), json),
        Command::Sample {
            target,
            set,
            n,
            seed,
            out,
        } => commands::sample::run(&target, &set, n, seed, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("truncfit: {e}");
            e.exit_code()
        }
    }
}
