//! `sok`: spectral operator kit CLI.
//!
//! Subcommands: gen | train | eval | superres | rollout | diagnose |
//! extend | report. Every command is deterministic given `--seed`
//! (falling back to the SOK_SEED environment variable, then 0).
//! Exit codes: 0 success, 1 numerical/validation failure,
//! 2 usage or I/O error.

mod commands;
mod config;
mod svg;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sok", version, about = "Spectral operator kit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark dataset (FNOD file + JSON sidecar).
    Gen(commands::gen::GenArgs),
    /// Train an FNO from a config file; writes a checkpoint and a
    /// history CSV.
    Train {
        /// Flat key=value config with [data]/[model]/[train]/[output]
        /// sections (see README for the key list).
        config: PathBuf,
    },
    /// Evaluate a checkpoint on a dataset split (per-sample metrics CSV).
    Eval(commands::eval::EvalArgs),
    /// Zero-shot super-resolution consistency report.
    Superres(commands::superres::SuperresArgs),
    /// Autoregressive rollout from an initial condition file.
    Rollout(commands::rollout::RolloutArgs),
    /// Spectral hygiene report for a dataset.
    Diagnose(commands::diagnose::DiagnoseArgs),
    /// Periodic extension of a signal file with seam metrics.
    Extend(commands::extend::ExtendArgs),
    /// Render a history CSV as an SVG line plot.
    Report(commands::report::ReportArgs),
}

/// Resolve a seed: explicit flag, then SOK_SEED, then 0.
pub(crate) fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("SOK_SEED")
            .ok()
            .and_then(|v| v.parse::<u64>().ok())
    })
    .unwrap_or(0)
}

/// The exact invocation, recorded as a trailing comment in every CSV.
pub(crate) fn invocation() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => commands::gen::run(args),
        Command::Train { config } => commands::train::run(&config),
        Command::Eval(args) => commands::eval::run(args),
        Command::Superres(args) => commands::superres::run(args),
        Command::Rollout(args) => commands::rollout::run(args),
        Command::Diagnose(args) => commands::diagnose::run(args),
        Command::Extend(args) => commands::extend::run(args),
        Command::Report(args) => commands::report::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
