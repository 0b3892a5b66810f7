//! Front end for the sigma2-gluing pipeline: argument parsing, config files,
//! sweeps and deterministic CSV/JSON emission.

pub mod commands;
pub mod config;
pub mod suites;

use clap::{Parser, Subcommand};
use config::Flags;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error(transparent)]
    Solver(#[from] sigma2_gluing::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("verification failed: {0}")]
    VerifyFailed(String),
}

impl CliError {
    /// 2 for rejected input, 3 for solver failures, 1 for failed invariants.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Solver(sigma2_gluing::Error::InvalidParams(_)) => 2,
            CliError::Solver(_) | CliError::Io { .. } => 3,
            CliError::VerifyFailed(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sigma2", version, about = "Delaunay-type sigma_2 orbits, linearized solves and a radial gluing model")]
pub struct Cli {
    #[command(flatten)]
    pub flags: Flags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a cylinder orbit and report the neck estimates
    Orbit,
    /// Evaluate the ball-picture family and its F/G coefficients
    Family,
    /// Run invariant suites and emit pass/fail with measured ratios
    Verify {
        /// Suite name, or `all`
        #[arg(long)]
        suite: Option<String>,
    },
    /// Solve one harmonic mode of the linearized operator
    SolveMode,
    /// Run the flat radial gluing demo
    Glue {
        /// Background-convergence table over these eps values, e.g. `0.1,0.05,0.025`
        #[arg(long)]
        eps_sweep: Option<String>,
    },
}

/// Dispatches a parsed command line.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Orbit => commands::orbit(&cli.flags),
        Command::Family => commands::family(&cli.flags),
        Command::Verify { suite } => commands::verify(&cli.flags, suite.as_deref()),
        Command::SolveMode => commands::solve_mode(&cli.flags),
        Command::Glue { eps_sweep } => commands::glue(&cli.flags, eps_sweep.as_deref()),
    }
}
