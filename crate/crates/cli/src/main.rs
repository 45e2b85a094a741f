//! Command-line driver: runs scenario files and writes CSV artifacts.

mod commands;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::{SweepAxis, SweepRequest};

#[derive(Parser, Debug)]
#[command(name = "ada-trotter", version, about = "Adaptive Trotterization of quantum many-body dynamics")]
struct Cli {
    /// Output directory for CSV files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps (falls back to ADA_TROTTER_THREADS).
    #[arg(long, global = true, env = "ADA_TROTTER_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One adaptive run, written to steps.csv.
    Run { scenario: PathBuf },
    /// Repeat a run over one tolerance, noise strength or fixed step size.
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        sites: Vec<usize>,
        /// Add exact long-time averages for comparison.
        #[arg(long)]
        exact: bool,
    },
    /// Adaptive run against fixed-step runs with the same step budget.
    Compare {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        dt: Vec<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Full diagonalization: spectrum, energy distribution, microcanonical curves.
    Ed { scenario: PathBuf },
}

fn load(path: &PathBuf, seed: Option<u64>) -> Result<scenario::Scenario> {
    let mut s = scenario::load(path)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let files = match &cli.command {
        Command::Run { scenario } => commands::cmd_run(&load(scenario, cli.seed)?, &cli.out)?,
        Command::Sweep { scenario, axis, values, sites, exact } => {
            let req = SweepRequest { axis: *axis, values: values.clone(), sites: sites.clone(), exact: *exact };
            commands::cmd_sweep(&load(scenario, cli.seed)?, &req, &cli.out)?
        }
        Command::Compare { scenario, dt, steps } => commands::cmd_compare(&load(scenario, cli.seed)?, dt, *steps, &cli.out)?,
        Command::Ed { scenario } => commands::cmd_ed(&load(scenario, cli.seed)?, &cli.out)?,
    };
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
