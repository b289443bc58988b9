//! Reproducible experiment runner: every experiment is a config file plus a
//! seed, and identical invocations produce byte-identical CSV/JSON outputs
//! (wall-clock timestamps live only in `run.log`).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod config;
mod error;
mod registry;
mod tasks;

use config::{load_config, Overrides, Task};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "mvsde",
    version,
    about = "Interacting-particle simulation and verification experiments for distribution-dependent SDEs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Propagate an ensemble and record moment trajectories
    Simulate(RunArgs),
    /// Fit a moment decay rate and evaluate Lyapunov condition margins
    Stability(RunArgs),
    /// Fit the contraction rate of synchronously coupled ensembles
    Contraction(RunArgs),
    /// Long-run diagnostics: Cauchy table, stationary-law summary
    Invariant(RunArgs),
    /// Run assumption checkers and write margin reports
    Check(RunArgs),
    /// List built-in models and Lyapunov bundles
    Presets,
}

#[derive(Args)]
struct RunArgs {
    /// Path to the experiment config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Cap the worker-thread count (never affects results)
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (overrides the OUTPUT_DIR env var and the config)
    #[arg(long)]
    output: Option<PathBuf>,
}

fn dispatch(task: Task, args: RunArgs) -> Result<(), CliError> {
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        // Results are thread-count independent by construction; this only
        // caps resource usage. Ignore the error if a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let overrides = Overrides {
        seed: args.seed,
        output: args.output,
    };
    let cfg = load_config(&args.config, task, &overrides)?;
    tasks::run_task(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Simulate(a) => dispatch(Task::Simulate, a),
        Cmd::Stability(a) => dispatch(Task::Stability, a),
        Cmd::Contraction(a) => dispatch(Task::Contraction, a),
        Cmd::Invariant(a) => dispatch(Task::Invariant, a),
        Cmd::Check(a) => dispatch(Task::Check, a),
        Cmd::Presets => {
            print!("{}", registry::preset_listing());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
