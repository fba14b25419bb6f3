mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use cfcal_core::{Formulation, KlDirection};
use clap::{Args, Parser, Subcommand};

use crate::config::TuneMethod;

/// Calibrate the Intelligent Driver Model against car-following data.
#[derive(Debug, Parser)]
#[command(name = "cfcal", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command.
#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root seed of every random stream. Required here or in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a trajectory CSV and write the surviving instances.
    Ingest {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Generate a heterogeneous synthetic dataset with its ground truth.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        drivers: Option<usize>,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Bayesian calibration by Hamiltonian Monte Carlo.
    CalibrateBayes {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        formulation: Option<Formulation>,
        #[arg(long)]
        prior_sigma: Option<f64>,
        #[arg(long)]
        step_size: Option<f64>,
        #[arg(long)]
        n_leapfrog: Option<usize>,
        #[arg(long)]
        base_run_steps: Option<usize>,
        #[arg(long)]
        max_total_steps: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        kl_direction: Option<KlDirection>,
    },
    /// Differential-evolution calibration with fixed hyperparameters.
    CalibrateDe {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long = "F")]
        f: Option<f64>,
        #[arg(long = "CR")]
        cr: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        population: Option<usize>,
        #[arg(long)]
        generations: Option<usize>,
        #[arg(long)]
        kl_direction: Option<KlDirection>,
    },
    /// Tune DE hyperparameters by grid search or Bayesian optimization.
    Tune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Option<TuneMethod>,
        /// Evaluation budget of Bayesian optimization.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        population: Option<usize>,
        #[arg(long)]
        generations: Option<usize>,
    },
    /// Score a parameter set: a literal 7-vector, a posterior CSV or a report.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Comma-separated v0,T,a,b,delta,s0,s1.
        #[arg(long, conflicts_with_all = ["posterior", "report"])]
        params: Option<String>,
        #[arg(long, conflicts_with = "report")]
        posterior: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        kl_direction: Option<KlDirection>,
    },
    /// Collect calibration reports into a Table-1-shaped summary.
    Report {
        #[command(flatten)]
        common: Common,
        /// Calibration report JSON files.
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        /// Adds a literature-baseline row scored on this dataset.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        kl_direction: Option<KlDirection>,
    },
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
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cfcal: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
