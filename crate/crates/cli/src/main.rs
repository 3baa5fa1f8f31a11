//! `shiftsparse` command-line tool.
//!
//! Exit codes: 0 success, 1 runtime failure (I/O, numerical breakdown),
//! 2 invalid configuration or input, 3 threshold not met.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Status, UsageError};

#[derive(Debug, Parser)]
#[command(
    name = "shiftsparse",
    version,
    about = "Joint shift and sparse-coefficient estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a dictionary and a shifted noisy signal.
    Synth(commands::SynthArgs),
    /// Estimate shift and coefficients for one signal.
    Decompose(commands::DecomposeArgs),
    /// Monte-Carlo success rate and SNR.
    Bench(commands::BenchArgs),
    /// Mean SNR over a grid of λ values with paired instances.
    Sweep(commands::SweepArgs),
    /// Compare against plain smoothed-ℓ0 over all shifted atoms.
    Baseline(commands::BaselineArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(commands::GradcheckArgs),
}

impl Command {
    fn workers(&self) -> usize {
        match self {
            Command::Synth(a) => a.common.workers,
            Command::Decompose(a) => a.common.workers,
            Command::Bench(a) => a.common.workers,
            Command::Sweep(a) => a.common.workers,
            Command::Baseline(a) => a.common.workers,
            Command::Gradcheck(a) => a.common.workers,
        }
    }
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_THRESHOLD: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<shiftsparse::Error>() {
            return match e {
                shiftsparse::Error::Io(_) | shiftsparse::Error::Diverged { .. } => EXIT_RUNTIME,
                _ => EXIT_CONFIG,
            };
        }
    }
    EXIT_RUNTIME
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    let workers = cli.command.workers();
    if workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()?;
    }
    match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Decompose(a) => commands::decompose(a),
        Command::Bench(a) => commands::bench(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Baseline(a) => commands::baseline(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::ThresholdFailed) => ExitCode::from(EXIT_THRESHOLD),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
