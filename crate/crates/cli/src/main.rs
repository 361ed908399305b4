#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] ridgemargin::Error),
    #[error("{0} check(s) failed")]
    Failed(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use ridgemargin::Error as E;
        match self {
            CliError::Failed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                E::NoKStar { .. } | E::SingularRegularization { .. } | E::DegenerateS(_) | E::ZeroSolution => 3,
                E::InvalidSpectrum(_) | E::InvalidParams(_) | E::TooFewTrials { .. } | E::Io(_) | E::Json(_) => 2,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ridgemargin", version, about = "Margin bounds for ridge classifiers on Gaussian mixtures")]
struct Cli {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides experiment.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Run the identity and inequality suites.
    Verify,
    /// Closed-form quantities and bounds for the configured problem.
    Bounds,
    /// Quantile sweep over mean scales.
    SweepMu,
    /// Quantile sweep over regularization.
    SweepLambda,
    /// Bi-level phase scan.
    Phase,
    /// Benign-overfitting demonstration.
    Demo,
    /// Per-trial concentration events.
    Events,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Bounds => "bounds",
            Command::SweepMu => "sweep-mu",
            Command::SweepLambda => "sweep-lambda",
            Command::Phase => "phase",
            Command::Demo => "demo",
            Command::Events => "events",
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.experiment.seed = s;
    }
    if let Some(d) = &cli.out {
        cfg.output.dir = d.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli)?;
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    commands::dispatch(cli.command, &cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ridgemargin {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
