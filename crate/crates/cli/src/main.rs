use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use ddlab::{cmd_analyze, cmd_report, cmd_train, exit_code, RunConfig, RunPaths, TrainOptions, UserError};

/// Label-noise training runs with layer probes.
#[derive(Parser)]
#[command(name = "ddlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a run described by a config file.
    Train {
        #[arg(short, long)]
        config: PathBuf,
        /// Continue from the run's latest checkpoint.
        #[arg(long)]
        resume: bool,
        /// Stop after this epoch.
        #[arg(long)]
        until: Option<u64>,
        #[arg(short, long)]
        quiet: bool,
    },
    /// Compute similarity, large-activation and per-class tables.
    Analyze { run: PathBuf },
    /// Render SVG figures from metrics and analysis tables.
    Report { run: PathBuf },
}

/// DDLAB_THREADS sizes the worker pool. Results do not depend on it.
fn init_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("DDLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| UserError(format!("DDLAB_THREADS={raw:?} is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    match cli.command {
        Command::Train { config, resume, until, quiet } => {
            let cfg = RunConfig::load(&config)?;
            let paths = cmd_train(&cfg, &TrainOptions { resume, until, quiet })?;
            println!("{}", paths.root.display());
        }
        Command::Analyze { run } => {
            let summary = cmd_analyze(&RunPaths::new(run))?;
            for (layer, neuron) in summary.tracked {
                println!("layer {layer}: tracked neuron {neuron}");
            }
        }
        Command::Report { run } => {
            for name in cmd_report(&RunPaths::new(run))? {
                println!("{name}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
