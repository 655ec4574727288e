//! Command-line front end for the three-party QSDC simulator.
//!
//! Subcommands: `run` (Monte Carlo experiment), `oracle` (exhaustive decode
//! truth table), `sweep` (detection curve over a parameter grid) and `demo`
//! (annotated trace of one honest run).

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::{ArgAction, Parser, Subcommand};

use qsdc_core::RoundKind;

pub use config::FileConfig;
pub use report::Format;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_ABORTED: u8 = 3;
pub const EXIT_INVARIANT: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "qsdc", version, about = "Three-party simultaneous QSDC simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides the seed from the configuration file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Report path; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// -v for info, -vv for debug.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Run an experiment and write its detection, leakage and fidelity report.
    Run,
    /// Check all eight (i, j, k) decodes and print the truth table.
    Oracle,
    /// Sample a detection curve over the [sweep] grid.
    Sweep,
    /// Trace one honest run round by round.
    Demo {
        /// Message length, 1 to 16.
        #[arg(default_value_t = 4)]
        n: usize,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("aborted: {kind} failed in trial {trial}, round {round}")]
    Aborted { trial: usize, round: usize, kind: RoundKind },
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Report(#[from] report::ReportError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => EXIT_CONFIG,
            CliError::Aborted { .. } => EXIT_ABORTED,
            CliError::Invariant(_) | CliError::Report(_) => EXIT_INVARIANT,
        }
    }
}

impl From<qsdc_core::HarnessError> for CliError {
    fn from(e: qsdc_core::HarnessError) -> Self {
        match e {
            qsdc_core::HarnessError::InvalidConfig(msg) => CliError::Config(msg),
            other => CliError::Invariant(other.to_string()),
        }
    }
}

/// Runs the parsed command line.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match &cli.command {
        Command::Run => commands::run(&file, cli),
        Command::Oracle => commands::oracle(cli),
        Command::Sweep => commands::sweep(&file, cli),
        Command::Demo { n } => commands::demo(*n, cli),
    }
}
