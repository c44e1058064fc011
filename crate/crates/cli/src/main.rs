//! `spatial-mem`: simulate, fit, predict, diagnose and sensitivity runs for
//! the spatial measurement-error model.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Simulate,
    Fit,
    Predict,
    Diagnose,
    Sensitivity,
}

#[derive(Debug, Parser)]
#[command(name = "spatial-mem", version, about = "Bayesian spatial regression with covariate measurement error")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured number of chains.
    #[arg(long)]
    chains: Option<usize>,
    /// Write fit summaries even if the PSRF check fails.
    #[arg(long)]
    force: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let name = match cli.command {
        Command::Simulate => "simulate",
        Command::Fit => "fit",
        Command::Predict => "predict",
        Command::Diagnose => "diagnose",
        Command::Sensitivity => "sensitivity",
    };
    let ov = commands::Overrides { seed: cli.seed, chains: cli.chains, force: cli.force };
    match commands::run(name, &cli.config, ov) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spatial-mem {name}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
