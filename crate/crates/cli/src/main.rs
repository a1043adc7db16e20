mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Command, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "dtm",
    version,
    about = "Data trading market solvers, operator analysis and sweeps"
)]
struct Cli {
    /// Command to run (falls back to `command` in the config).
    #[arg(value_enum)]
    command: Option<Command>,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Main output file; side files get a suffix appended.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Infeasible(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible parameters: {m}"),
            CliError::Runtime(m) => write!(f, "runtime failure: {m}"),
        }
    }
}

impl From<dtm::Error> for CliError {
    fn from(e: dtm::Error) -> CliError {
        use dtm::Error as E;
        match e {
            E::Infeasible(_) | E::Degenerate(_) | E::InvalidUser { .. } => {
                CliError::Infeasible(e.to_string())
            }
            E::UnknownUser(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_seed(cli.seed);
    let command = cli.command.or(cfg.command).ok_or_else(|| {
        CliError::Config("no command given on the command line or in the config".into())
    })?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(|p| cfg.resolve(p)))
        .ok_or_else(|| {
            CliError::Config("no output path (use --out or `output` in the config)".into())
        })?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let report = commands::execute(command, &cfg)?;
    output::write_all(&out, &report.artifacts)?;
    println!("{}", report.message);
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dtm: {e}");
            ExitCode::from(e.code())
        }
    }
}
