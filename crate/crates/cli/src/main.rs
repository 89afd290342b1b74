//! `filtration`: drive the nonlocal filtration laboratory from config files.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver or I/O failure,
//! 4 analysis could not be measured (coverage).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod experiment;

#[derive(Parser)]
#[command(
    name = "filtration",
    version,
    about = "Numerical experiments for nonlocal generalized filtration equations",
    after_help = "Worker threads are taken from the FILTRATION_THREADS environment variable \
                  (positive integer; defaults to the available cores). Runs are deterministic \
                  for a fixed config and thread count."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a configured problem, run its diagnostics, and write artifacts.
    Run {
        /// Path to a dotted-key config file.
        config: PathBuf,
    },
    /// Repeat an experiment for each value of one scalar config key.
    Sweep {
        /// Path to the base config file.
        config: PathBuf,
        /// Dotted key to vary, e.g. `kernel.alpha`.
        #[arg(long)]
        parameter: String,
        /// Comma-separated values, e.g. `0.5,1.0,1.5`.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<String>,
    },
    /// Print the iteration threshold and, given a seed, the recursion trace.
    Threshold {
        /// Structural constant C of the recursion.
        #[arg(long = "C")]
        c: f64,
        /// Spatial dimension n.
        #[arg(long)]
        n: u32,
        /// Operator order alpha in (0, 2].
        #[arg(long)]
        alpha: f64,
        /// Seed I_0; omit to print the threshold only.
        #[arg(long = "I0")]
        i0: Option<f64>,
        /// Recursion levels to iterate.
        #[arg(long, default_value_t = 200)]
        steps: usize,
    },
    /// Recompute reports for an artifact directory written by `run`,
    /// resuming an interrupted run first.
    Analyze {
        /// The experiment's output directory.
        run_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config } => experiment::run_experiment(&config),
        Command::Sweep { config, parameter, values } => {
            experiment::sweep(&config, &parameter, &values)
        }
        Command::Threshold { c, n, alpha, i0, steps } => {
            experiment::threshold_cmd(c, n, alpha, i0, steps)
        }
        Command::Analyze { run_dir } => experiment::analyze(&run_dir),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code())
        }
    }
}
