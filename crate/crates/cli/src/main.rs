//! `upacb`: design, inspect and simulate UPA hybrid-beamforming codebooks.
//!
//! Exit codes: 0 success, 1 other failure (including failed verification),
//! 2 invalid configuration, 3 infeasible configuration (`Q ≥ M`),
//! 4 corrupt codebook file, 5 mismatched array configurations.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use upa_codebook::Error;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_) | Error::EmptySweep => 2,
            Error::Infeasible { .. } => 3,
            Error::Parse { .. } => 4,
            _ => 1,
        };
        CliError::new(code, e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "upacb", version, about = "Codebook design for hybrid-beamforming planar arrays")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Design a codebook and write it with a JSON build-stats file.
    Design {
        #[arg(long)]
        config: PathBuf,
        /// Codebook path (default: <output_dir>/codebook.txt).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Score every k-th candidate instead of the configured sweep.
        #[arg(long)]
        stride: Option<u64>,
        #[arg(long)]
        requantize_shift: bool,
        /// Resume file for long sweeps.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Best-beam gain over the physical sector as CSV.
    Pattern {
        codebook: PathBuf,
        /// `HxV` grid, or a single `N` for `N x N/2`.
        #[arg(long, default_value = "180x90")]
        grid_res: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo rate table for one or more codebooks.
    Simulate {
        #[arg(required = true)]
        codebooks: Vec<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Paired per-realization rate difference of two codebooks.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the numerical invariant suite; exits 0 iff every check passes.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Command::Design {
            config,
            out,
            workers,
            seed,
            stride,
            requantize_shift,
            checkpoint,
        } => commands::design(&commands::DesignArgs {
            config,
            out,
            workers,
            seed,
            stride,
            requantize_shift,
            checkpoint,
        }),
        Command::Pattern {
            codebook,
            grid_res,
            out,
        } => commands::pattern(&codebook, &grid_res, out.as_deref()),
        Command::Simulate {
            codebooks,
            config,
            out,
            workers,
            seed,
        } => commands::simulate(&codebooks, &config, out.as_deref(), workers, seed),
        Command::Compare {
            a,
            b,
            config,
            out,
            workers,
            seed,
        } => commands::compare(&a, &b, &config, out.as_deref(), workers, seed),
        Command::Verify {
            config,
            tolerance_scale,
            trials,
            seed,
            out,
        } => commands::verify(config.as_deref(), tolerance_scale, trials, seed, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
