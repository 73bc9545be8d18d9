//! `gw`: construct, sample, check and cost-analyze conditioned
//! Galton-Watson trees from a JSON run configuration.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric or conditioning
//! error, 4 equivalence-check failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Sink;
use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Check(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "error[config]: {msg}"),
            CliError::Numeric(msg) => write!(f, "error[numeric]: {msg}"),
            CliError::Check(msg) => write!(f, "error[check]: {msg}"),
        }
    }
}

impl From<gw_core::Error> for CliError {
    fn from(e: gw_core::Error) -> CliError {
        CliError::Numeric(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Check(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "gw",
    about = "Conditioned Galton-Watson trees: survival tables, conditioned samplers, \
             exact equivalence checks, and search-cost analysis",
    version
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output file (tables); directory for `curve`. Defaults to stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Overrides the seed from the configuration.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Overrides the replication count from the configuration.
    #[arg(long, global = true, value_name = "N")]
    reps: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Survival probabilities p_lk as CSV (l, p_lk).
    Survival,
    /// Line-delimited serialized trees; mode: unconditioned, mixture,
    /// survive, extinct, or type:i (1-based, with a "system").
    Sample,
    /// Enumeration-based equivalence report; nonzero exit above 1e-8.
    Check,
    /// Exact cost recursion as CSV (l, D, E) plus scalars.
    Cost,
    /// Monte Carlo search simulation summary.
    Simulate,
    /// Cost-versus-mean and optimal-mean tables as CSV files.
    Curve,
    /// Optimal offspring mean by scan plus golden-section refinement.
    Optimize,
    /// Infinite-tree survival probability and cost per successful step.
    Infinite,
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let cfg = RunConfig::load(config_path)?;
    let sink = Sink::new(cli.out.clone().or_else(|| cfg.out.clone()));
    match cli.command {
        Command::Survival => commands::cmd_survival(&cfg, &sink),
        Command::Sample => commands::cmd_sample(&cfg, &sink, cli.seed),
        Command::Check => commands::cmd_check(&cfg),
        Command::Cost => commands::cmd_cost(&cfg, &sink),
        Command::Simulate => commands::cmd_simulate(&cfg, &sink, cli.seed, cli.reps),
        Command::Curve => commands::cmd_curve(&cfg, &sink),
        Command::Optimize => commands::cmd_optimize(&cfg),
        Command::Infinite => commands::cmd_infinite(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(stdout) => {
            print!("{stdout}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}
