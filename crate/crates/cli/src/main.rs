//! Experiment runner: prepare featurized splits, run seeded bootstrapping
//! strategies, compare two runs with a paired significance test, and print
//! reports.
//!
//! Exit codes: 0 success, 1 strategy/runtime failure, 2 input or
//! configuration error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "triboot",
    about = "Semi-supervised domain adaptation experiments: self-training, \
             tri-training, and multi-task tri-training over a small neural classifier",
    version
)]
struct Cli {
    /// Experiment configuration file (flat key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Seeds to run in parallel; overrides the config file.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Overwrite existing prepared artifacts.
    #[arg(long, global = true)]
    force: bool,

    /// Output directory; overrides the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the vocabulary and featurized splits for an experiment.
    Prepare,
    /// Run the configured strategy across seeds and write a report.
    Run,
    /// Compare two run directories with a paired bootstrap test.
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
        /// Gold labels file; defaults to the prepared split next to the runs.
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Bootstrap resamples per seed pair.
        #[arg(long, default_value_t = triboot::eval::DEFAULT_RESAMPLES)]
        resamples: usize,
    },
    /// Print a run directory's report.
    Report { run_dir: PathBuf },
}

/// Errors with their process exit kind.
#[derive(Debug)]
pub enum CliError {
    /// Bad input or configuration (exit 2).
    Input(String),
    /// A strategy or runtime failure (exit 1).
    Runtime(String),
}

impl CliError {
    fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let load_config = |cli: &Cli| -> Result<config::ExperimentConfig, CliError> {
        let path = cli
            .config
            .as_ref()
            .ok_or_else(|| CliError::input("--config is required for this command"))?;
        let mut cfg = config::ExperimentConfig::from_file(path)?;
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        if let Some(jobs) = cli.jobs {
            cfg.jobs = jobs;
        }
        if let Some(out) = &cli.out {
            cfg.out_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    };

    let result = match &cli.command {
        Command::Prepare => load_config(&cli).and_then(|cfg| commands::prepare(&cfg, cli.force)),
        Command::Run => load_config(&cli).and_then(|cfg| commands::run(&cfg)),
        Command::Compare {
            run_a,
            run_b,
            gold,
            resamples,
        } => commands::compare(run_a, run_b, gold.as_deref(), *resamples, cli.out.as_deref()),
        Command::Report { run_dir } => commands::report(run_dir),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
