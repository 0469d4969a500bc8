//! `downscale`: synthesize datasets, train models, run transferability
//! protocols and verify gradients.
//!
//! Exit codes: 0 success, 1 runtime or protocol failure, 2 usage error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use downscale_core::Error;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config files or settings that fail validation.
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => CliError::Usage(msg),
            e => CliError::Runtime(e),
        }
    }
}

#[derive(Parser)]
#[command(name = "downscale", version, about = "Climate downscaling workbench")]
struct Cli {
    /// JSON object with default settings for the command; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every command.
#[derive(Args, Serialize)]
pub struct Common {
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (GRD1 fields, sidecars and manifest).
    Synth(commands::SynthArgs),
    /// Train one model on one or more manifests.
    Train(commands::TrainArgs),
    /// Run a transferability protocol and write its report.
    Protocol(commands::ProtocolArgs),
    /// Finite-difference gradient verification.
    Gradcheck(commands::GradcheckArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap exits 2 on usage errors and 0 for --help/--version.
            e.exit();
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "warn",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .init();
    let cfg = cli.config.as_deref();
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(cfg, &cli.common, a),
        Command::Train(a) => commands::train(cfg, &cli.common, a),
        Command::Protocol(a) => commands::protocol(cfg, &cli.common, a),
        Command::Gradcheck(a) => commands::gradcheck(cfg, &cli.common, a),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
