//! `cracklab`: solves cracked p-Laplacian problems and runs the crack
//! sequence experiments from config files.
//!
//! Exit status: 0 on success, 2 on a config error, 3 on a numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

#[derive(Debug, Parser)]
#[command(name = "cracklab", version, about = "Primal and dual p-Laplacian solvers on cracked domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Config document (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overrides the config resolution (cells per unit length).
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// Overrides the solver tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed for the random test fields.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimize the energy; writes u.csv, summary.csv and report.txt.
    Solve,
    /// Solve the dual problem; writes v.csv, components.csv, summary.csv and report.txt.
    Dual,
    /// Run a crack-sequence experiment; writes convergence.csv, metrics.csv and report.txt.
    Gamma,
    /// Capacity estimates over a resolution list; writes capacity.csv.
    Capacity,
    /// Hausdorff distance between two set files.
    Hausdorff {
        first: PathBuf,
        second: PathBuf,
    },
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl From<cracklab::Error> for CliError {
    fn from(e: cracklab::Error) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

pub struct Overrides {
    pub out: PathBuf,
    pub resolution: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ov = Overrides {
        out: cli.out,
        resolution: cli.resolution,
        tol: cli.tol,
        seed: cli.seed,
    };
    let config = || cli.config.clone().ok_or_else(|| CliError::Config("this subcommand needs --config PATH".into()));
    let result = match cli.command {
        Command::Solve => config().and_then(|c| commands::solve(&c, &ov)),
        Command::Dual => config().and_then(|c| commands::dual(&c, &ov)),
        Command::Gamma => config().and_then(|c| commands::gamma(&c, &ov)),
        Command::Capacity => config().and_then(|c| commands::capacity(&c, &ov)),
        Command::Hausdorff { first, second } => commands::hausdorff(&first, &second, &ov),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(m)) => {
            eprintln!("numeric failure: {m}");
            ExitCode::from(3)
        }
        Err(CliError::Io(m)) => {
            eprintln!("i/o error: {m}");
            ExitCode::from(1)
        }
    }
}
