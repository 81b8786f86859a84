//! `pdatrack` command-line driver.
//!
//! Exit codes: 0 success, 2 invalid scenario or arguments, 3 numerical
//! degeneracy, 4 I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pdatrack::harness::{monte_carlo, run_once};
use pdatrack::output::{emit_record, emit_summary, Format};
use pdatrack::scenario::load_scenario;
use pdatrack::Error;

/// Worker threads for Monte Carlo runs; defaults to one per core.
const WORKERS_ENV: &str = "PDATRACK_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "pdatrack", version, about = "Multi-radar PDA fusion tracking and BCRLB evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one seeded simulation and write its per-frame record.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: Format,
    },
    /// Run many seeded simulations and write per-frame RMSE, NEES and bound statistics.
    Montecarlo {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        runs: usize,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output format; inferred from the file extension when omitted.
        #[arg(long)]
        format: Option<Format>,
    },
    /// Validate a scenario file without running it.
    Check {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 4,
        e if e.is_numerical() => 3,
        _ => 2,
    }
}

fn configure_workers() -> Result<(), Error> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Parse(format!("{WORKERS_ENV} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Parse(format!("{WORKERS_ENV}: {e}")))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate {
            scenario,
            seed,
            out,
            format,
        } => {
            let mut s = load_scenario(&scenario)?;
            if let Some(seed) = seed {
                s.master_seed = seed;
            }
            let record = run_once(&s, 0)?;
            emit_record(&record, format, &out)?;
            log::info!("wrote {} rows to {}", record.rows.len(), out.display());
        }
        Command::Montecarlo {
            scenario,
            runs,
            out,
            seed,
            format,
        } => {
            configure_workers()?;
            let mut s = load_scenario(&scenario)?;
            if let Some(seed) = seed {
                s.master_seed = seed;
            }
            let summary = monte_carlo(&s, runs)?;
            if !summary.failed_runs.is_empty() {
                eprintln!(
                    "{} of {} runs failed and were excluded",
                    summary.failed_runs.len(),
                    runs
                );
            }
            emit_summary(&summary, format.unwrap_or_else(|| Format::from_path(&out)), &out)?;
        }
        Command::Check { scenario } => {
            let s = load_scenario(&scenario)?;
            println!(
                "ok: {} radars, {} targets, {} frames (hash {})",
                s.radars.len(),
                s.targets.len(),
                s.frame_count,
                s.hash()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
