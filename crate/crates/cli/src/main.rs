//! `pbcast`: batch experiments for the broadcast protocol.
//!
//! Exit codes: 0 pass, 1 assertion failure, 2 configuration error,
//! 3 infeasible placement.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{ExperimentConfig, Seeds};

#[derive(Parser)]
#[command(name = "pbcast", version, about = "Byzantine-resilient broadcast experiments on planar graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the batch described by an experiment config.
    Run {
        config: PathBuf,
        /// Run this single seed instead of the configured ones.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: config, then $PBCAST_OUT, then ./pbcast-out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: one per core).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Print the parameters of a topology file.
    Analyze {
        topology: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Write the critical network and run the paired mirror experiment on it.
    Counterexample {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Re-execute a transcript and compare it line by line.
    Replay { transcript: PathBuf },
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Infeasible(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible placement: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

fn execute(command: Command) -> Result<bool, CliError> {
    match command {
        Command::Run { config, seed, out, jobs, horizon } => {
            let mut config = ExperimentConfig::read(&config)?;
            if let Some(seed) = seed {
                config.seeds = Seeds::List(vec![seed]);
            }
            if horizon.is_some() {
                config.horizon = horizon;
            }
            if jobs == Some(0) {
                return Err(CliError::Config("--jobs must be at least 1".into()));
            }
            let out = commands::output_dir(out, Some(&config));
            let batch = config.expand()?;
            commands::cmd_run(batch, &out, jobs)
        }
        Command::Analyze { topology, json } => commands::cmd_analyze(&topology, json),
        Command::Counterexample { out, horizon } => {
            commands::cmd_counterexample(&commands::output_dir(out, None), horizon)
        }
        Command::Replay { transcript } => commands::cmd_replay(&transcript),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("pbcast: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
