use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use dbcs_core::experiment::{self, ExperimentConfig, Workspace};
use dbcs_core::matrix::set_parallel;

/// Deep blind compressed sensing experiment driver.
///
/// Every subcommand works inside one output directory. `run` executes all
/// stages in order; the others run a single stage and expect the artifacts
/// of the earlier stages to be present.
#[derive(Debug, Parser)]
#[command(name = "dbcs", version)]
struct Cli {
    /// Experiment config (JSON). Defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads. Values above 1 enable the parallel matrix products,
    /// encoder and classifier; their results match single-threaded runs.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate or load the signals (X.mat, labels.json, truth/).
    Synth,
    /// Build the measurement operator and simulate Y = A X.
    Acquire,
    /// Split the samples and fit the model (split.json, model/).
    Fit,
    /// Compute codes for every sample (codes.mat).
    Encode,
    /// Synthesize signals from the codes (Xhat.mat).
    Reconstruct,
    /// Nearest-neighbour classification of the codes (classification.json).
    Classify,
    /// Collect all artifacts into report.json.
    Report,
    /// Run every stage in order.
    Run,
    /// Write a DBCS1 matrix as CSV, one line per row.
    ExportCsv {
        /// DBCS1 matrix file.
        matrix: PathBuf,
        /// CSV file to write.
        output: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply_env_overrides()?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn configure_threads(threads: usize) -> Result<()> {
    if threads > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("failed to start the thread pool")?;
        set_parallel(true);
    } else {
        set_parallel(false);
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    configure_threads(cli.threads)?;
    if let Command::ExportCsv { matrix, output } = &cli.command {
        experiment::export_csv(matrix, output)?;
        return Ok(());
    }
    let cfg = load_config(&cli)?;
    let ws = Workspace::new(&cfg.output_dir);
    match cli.command {
        Command::Synth => experiment::synth(&cfg, &ws)?,
        Command::Acquire => experiment::acquire(&cfg, &ws)?,
        Command::Fit => experiment::fit(&cfg, &ws)?,
        Command::Encode => experiment::encode(&cfg, &ws)?,
        Command::Reconstruct => experiment::reconstruct(&cfg, &ws)?,
        Command::Classify => experiment::classify(&cfg, &ws)?,
        Command::Report => experiment::report(&cfg, &ws, None)?,
        Command::Run => {
            let path = experiment::run(&cfg)?;
            println!("{}", path.display());
        }
        Command::ExportCsv { .. } => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
