//! Command-line entry point. Log verbosity comes from `RUST_LOG`
//! (`env_logger` syntax); exit code 0 means success, 1 a configuration or
//! input problem, and 2 a numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cpdflow::cli::commands;
use cpdflow::cli::ExperimentConfig;
use cpdflow::Error;

#[derive(Parser)]
#[command(name = "cpdflow", version, about = "Flow matching with condition-specific priors")]
struct Args {
    /// Path to the experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured dataset to CSV.
    GenData,
    /// Fit the conditional prior and save it.
    FitPrior,
    /// Train a velocity net and save checkpoint plus loss history.
    Train,
    /// Generate samples from a trained checkpoint.
    Sample {
        /// Condition to sample (class id, or angle in radians for the
        /// continuous toy). Default: every condition in the dataset.
        #[arg(long)]
        condition: Option<String>,
        /// Samples per condition.
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Also write the integration paths.
        #[arg(long)]
        trajectories: bool,
    },
    /// Score a trained checkpoint against reference data.
    Eval,
    /// Compare coupling transport cost across strategies.
    BenchTransport {
        /// Batches to average per strategy.
        #[arg(long, default_value_t = 20)]
        batches: usize,
    },
    /// Sweep fixed Euler budgets and record sample quality.
    BenchNfe {
        /// Checkpoints to sweep (default: the config's checkpoint).
        #[arg(long)]
        checkpoint: Vec<String>,
    },
    /// Track quality and adaptive-solver cost across training epochs.
    BenchEpochs,
    /// Render a CSV produced by the other commands as SVG.
    Plot {
        /// scatter | trajectory | curve
        #[arg(long)]
        kind: String,
        /// Input CSV.
        #[arg(long)]
        input: PathBuf,
        /// Output SVG.
        #[arg(long)]
        output: PathBuf,
        /// Column for the horizontal axis.
        #[arg(long, default_value = "x_0")]
        x: String,
        /// Column for the vertical axis.
        #[arg(long, default_value = "x_1")]
        y: String,
        /// Grouping column (colors / series / trajectory id).
        #[arg(long)]
        group: Option<String>,
        /// Plot title.
        #[arg(long, default_value = "")]
        title: String,
    },
}

fn load_config(args: &Args) -> Result<ExperimentConfig, Error> {
    let path = args
        .config
        .as_ref()
        .ok_or_else(|| Error::Domain("this command needs --config <file>".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.display().to_string();
    }
    Ok(cfg)
}

fn run(args: &Args) -> Result<(), Error> {
    match &args.command {
        Command::GenData => commands::gen_data(&load_config(args)?),
        Command::FitPrior => commands::fit_prior(&load_config(args)?),
        Command::Train => commands::train(&load_config(args)?),
        Command::Sample {
            condition,
            n,
            trajectories,
        } => commands::sample(&load_config(args)?, condition.as_deref(), *n, *trajectories),
        Command::Eval => commands::eval(&load_config(args)?),
        Command::BenchTransport { batches } => {
            commands::bench_transport(&load_config(args)?, *batches)
        }
        Command::BenchNfe { checkpoint } => commands::bench_nfe(&load_config(args)?, checkpoint),
        Command::BenchEpochs => commands::bench_epochs(&load_config(args)?),
        Command::Plot {
            kind,
            input,
            output,
            x,
            y,
            group,
            title,
        } => commands::plot_csv(
            kind.parse()?,
            input,
            output,
            x,
            y,
            group.as_deref(),
            title,
        ),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
