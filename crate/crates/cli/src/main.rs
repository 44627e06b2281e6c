//! `towtrack`: single-run tracking, Monte Carlo benchmarking and report
//! merging for towed-array bearings-only tracking.

mod commands;
mod manifest;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use towtrack::gaussfilt::FilterKind;
use towtrack::kinematics::ModelKind;
use towtrack::simkit::Mode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(format!("json: {e}"))
    }
}

#[derive(Parser, Debug)]
#[command(name = "towtrack", version, about = "Towed-array bearings-only tracking with left-right ambiguity resolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Track one simulated run and write a per-step CSV.
    Track(CommonArgs),
    /// Run the Monte Carlo benchmark. Omitted --filter/--case/--mode sweep all values.
    Montecarlo(CommonArgs),
    /// Merge Monte Carlo output directories into one JSON report.
    Report {
        /// Directories written by `montecarlo`.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Report file to write.
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// TOML scenario file; omitted keys take the default scenario values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long, value_parser = parse_filter)]
    pub filter: Option<FilterKind>,
    #[arg(long, value_parser = parse_case)]
    pub case: Option<ModelKind>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for Monte Carlo (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

fn parse_filter(s: &str) -> Result<FilterKind, String> {
    s.parse().map_err(|e: towtrack::Error| e.to_string())
}

fn parse_case(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: towtrack::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: towtrack::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Track(args) => commands::track(args),
        Command::Montecarlo(args) => commands::montecarlo(args),
        Command::Report { inputs, out } => report::run(inputs, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("towtrack: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
