//! `mixrank`: experiment driver emitting CSV and JSON reports.

mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use error::CliError;

#[derive(Parser)]
#[command(
    name = "mixrank",
    version,
    about = "Sparse, low-rank and tensor-train approximation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Dimension of the sparse tensor-product space per level budget.
    Dim(Io),
    /// Singular-value decay of oracle functions with a fitted rate.
    Decay(Io),
    /// Sparse-space projection error against degrees of freedom.
    SparseConvergence(Io),
    /// TT-SVD compression, writing containers and a report.
    Tt(Io),
    /// Rate and rank formulas for a smoothness profile.
    Rates(Io),
}

fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Parses the config, records it in the output directory and runs `f`.
fn run<T, F>(io: &Io, f: F) -> Result<(), CliError>
where
    T: DeserializeOwned + Serialize,
    F: FnOnce(&T, &Path) -> Result<(), CliError>,
{
    let cfg: T = load(&io.config)?;
    std::fs::create_dir_all(&io.out).map_err(CliError::Output)?;
    output::write_json(&io.out.join("config.json"), &cfg)?;
    f(&cfg, &io.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Dim(io) => run(io, commands::dim),
        Command::Decay(io) => run(io, commands::decay),
        Command::SparseConvergence(io) => run(io, commands::sparse_convergence_cmd),
        Command::Tt(io) => run(io, commands::tt),
        Command::Rates(io) => run(io, commands::rates),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mixrank: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
