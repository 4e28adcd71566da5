//! `smallball`: batch experiments on Gaussian small-ball probabilities.
//!
//! Exit status: 0 on success, 1 when the output cannot be written, 2 for
//! configuration errors, 3 when a computation fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use output::{Format, Header};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("compute error: {0}")]
    Compute(#[from] smallball::Error),
    #[error("output error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Compute(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "smallball",
    version,
    about = "Small-ball probabilities of Gaussian elements of l2"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON spectrum descriptor; overrides the config's spectrum.
    #[arg(long, global = true)]
    spectrum: Option<PathBuf>,

    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,

    /// Seed for the Monte Carlo oracles; overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Tabulate mu(theta).
    Mu,
    /// Tabulate psi(theta).
    Psi,
    /// Tabulate I(theta).
    #[command(name = "I")]
    I,
    /// Solve mu(theta) = eps over an epsilon grid.
    Invert,
    /// Tabulate the auxiliary function 1/theta(s).
    Rho,
    /// Saddlepoint estimate of P(z < eps), in log space.
    Estimate,
    /// Monte Carlo or characteristic-function estimate with brackets.
    Oracle,
    /// Check F(s + x rho(s)) / F(s) -> e^x.
    GammaCheck,
    /// Check rho(s + x rho(s)) / rho(s) -> 1.
    SelfNeglect,
    /// Estimate the auxiliary function from F.
    AuxEstimate,
    /// Rebuild a spectrum from an auxiliary function.
    Reconstruct,
    /// Self-neglecting representation of phi on the step grid of rho.
    Repr2,
    /// Kernel-smoothed expectation over a bandwidth grid.
    Kernel,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Mu => "mu",
            Command::Psi => "psi",
            Command::I => "I",
            Command::Invert => "invert",
            Command::Rho => "rho",
            Command::Estimate => "estimate",
            Command::Oracle => "oracle",
            Command::GammaCheck => "gamma-check",
            Command::SelfNeglect => "self-neglect",
            Command::AuxEstimate => "aux-estimate",
            Command::Reconstruct => "reconstruct",
            Command::Repr2 => "repr2",
            Command::Kernel => "kernel",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {n} threads: {e}")))?;
    }
    let mut cfg = ExperimentConfig::load(cli.config.as_deref(), cli.spectrum.as_deref(), cli.seed)?;
    let outcome = commands::run(&cli.command, &mut cfg)?;
    let header = Header {
        tool: "smallball",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name().to_string(),
        config: serde_json::to_value(&cfg).map_err(|e| CliError::Config(e.to_string()))?,
        summary: outcome.summary,
    };
    let mut out: Box<dyn Write> = match &cli.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    output::write_table(&mut out, cli.format, &header, &outcome.table)?;
    eprintln!(
        "{}: {} rows; {}",
        header.command,
        outcome.table.rows.len(),
        header.summary
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("smallball: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
