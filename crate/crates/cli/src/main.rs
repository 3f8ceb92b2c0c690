//! `slopebound`: weights, fits, bound constants, RE estimates and simulations.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slopebound_core::weights::{SlopeWeightConfig, DEFAULT_SLOPE_A};

use commands::Common;

#[derive(Parser)]
#[command(name = "slopebound", version, about = "Slope and Lasso oracle bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of Monte Carlo trials (per grid point for sweeps).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output directory; without it the main output goes to stdout.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Reject unnormalized designs and treat non-convergence as failure.
    #[arg(long, global = true)]
    strict: bool,
    /// Use randomized search instead of exhaustive enumeration.
    #[arg(long, global = true)]
    randomized: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Slope weight schedule as CSV.
    Weights(WeightArgs),
    /// Fit the Lasso or Slope.
    Solve,
    /// Bound constants and right-hand sides.
    Bounds,
    /// Restricted eigenvalue or sparse eigenvalue estimates.
    Re,
    /// Monte Carlo coverage of the oracle bounds.
    Simulate,
    /// Error-rate sweep.
    Sweep,
}

#[derive(Args)]
struct WeightArgs {
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long = "A")]
    a: Option<f64>,
}

/// Exit status 1 for bad inputs, 2 for numerical failures.
pub enum Failure {
    Validation(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<slopebound_core::Error> for Failure {
    fn from(e: slopebound_core::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.into())
        } else {
            Failure::Validation(e.into())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let a = &cli.common;
    let common = Common {
        config: a.config.clone(),
        seed: a.seed,
        trials: a.trials,
        strict: a.strict,
        randomized: a.randomized,
    };
    let outputs = match cli.command {
        Command::Weights(w) => {
            let flags = match (w.p, w.n, w.sigma) {
                (Some(p), Some(n), Some(sigma)) => {
                    Some(SlopeWeightConfig::new(p, n, sigma).with_a(w.a.unwrap_or(DEFAULT_SLOPE_A)))
                }
                _ => None,
            };
            commands::weights(&common, flags)?
        }
        Command::Solve => commands::solve(&common)?,
        Command::Bounds => commands::bounds(&common)?,
        Command::Re => commands::re(&common)?,
        Command::Simulate => commands::simulate(&common)?,
        Command::Sweep => commands::sweep(&common)?,
    };
    for path in outputs.commit(a.out_dir.as_deref()).map_err(Failure::Validation)? {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(2)
        }
    }
}
