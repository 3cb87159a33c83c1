//! `imsynth`: synthesize, analyze and simulate internal-model optimization
//! algorithms for time-varying objectives.

mod commands;
mod config;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::exit::CliError;

#[derive(Parser, Debug)]
#[command(name = "imsynth", version, about = "Internal-model algorithm synthesis for time-varying optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML file with any of the options below; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for sweeps and multi-seed runs.
    #[arg(long, global = true, env = "IMSYNTH_WORKERS")]
    workers: Option<usize>,
    #[command(flatten)]
    opts: RunConfig,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Find the optimal rate for a harmonic set and export the algorithm.
    Synth,
    /// Certify the convergence rate of an existing algorithm.
    Analyze,
    /// Run an algorithm (or a baseline) on a time-varying objective.
    Simulate,
    /// Optimal rate across single-frequency harmonic sets on [0, pi].
    Sweep,
    /// Check the internal-model structure of an algorithm.
    Verify,
    /// Asymptotic tracking error of the baselines vs. exosystem order.
    Figure1,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Analyze => "analyze",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
            Command::Figure1 => "figure1",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::validation(vec!["worker count must be positive".into()]));
        }
        // fails only if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| CliError::validation(vec![e]))?,
        None => RunConfig::default(),
    }
    .merged(&cli.opts);
    commands::dispatch(cli.command, &cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code)
        }
    }
}
