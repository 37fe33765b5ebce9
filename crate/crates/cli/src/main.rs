use anyhow::Result;
use clap::{Parser, Subcommand};
use spinprobe_cli::commands;
use spinprobe_cli::config::CommonOpts;
use std::path::PathBuf;
use std::process::ExitCode;

/// Spin-qubit decoherence as a probe of an interacting spin chain.
#[derive(Parser)]
#[command(name = "spinprobe", version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the coherence trace for a single parameter point.
    Run(CommonOpts),
    /// Compute traces and observables for a grid of parameter points.
    Sweep(CommonOpts),
    /// Compare the trace files of two run directories.
    Compare {
        /// First run directory.
        dir_a: PathBuf,
        /// Second run directory.
        dir_b: PathBuf,
        /// Where to write the deviation metrics.
        #[arg(long, default_value = "compare.json")]
        out: PathBuf,
        /// Deviation above which the first-divergence time is recorded.
        #[arg(long, default_value_t = 1e-12)]
        threshold: f64,
    },
    /// Run the cross-backend verification battery.
    Verify {
        /// Include the long-running large-chain checks.
        #[arg(long)]
        slow: bool,
    },
    /// Compute the interacting ground state and report energy and entropy.
    Ground(commands::GroundOpts),
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(opts) => commands::run_cmd(&opts).map(|()| true),
        Command::Sweep(opts) => commands::sweep_cmd(&opts).map(|()| true),
        Command::Compare { dir_a, dir_b, out, threshold } => {
            commands::compare_cmd(&dir_a, &dir_b, &out, threshold).map(|()| true)
        }
        Command::Verify { slow } => Ok(commands::verify_cmd(slow)),
        Command::Ground(opts) => commands::ground_cmd(&opts).map(|()| true),
    }
}

fn main() -> ExitCode {
    // Worker-level parallelism is managed explicitly; keep the linear-algebra
    // backend single-threaded unless the user overrides it.
    if std::env::var_os("OPENBLAS_NUM_THREADS").is_none() {
        std::env::set_var("OPENBLAS_NUM_THREADS", "1");
    }
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
