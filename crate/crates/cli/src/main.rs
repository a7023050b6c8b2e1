//! `wasslab` command-line front end.
//!
//! Exit codes: 0 ok, 2 input error, 3 no rate prediction, 4 numerical failure.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "wasslab", version, about = "Wasserstein convergence laboratory for dependent sequences")]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed override; takes precedence over any seed in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for CSV and JSON files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// W_r distance between a sample file and a reference law.
    Distance(DistanceArgs),
    /// Simulate a trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit the decay rate of a moment of W_1 and compare it with the predicted exponent.
    Rates(RatesArgs),
    /// Estimate dependence coefficients of a map from its Ulam operator.
    Alpha(AlphaArgs),
    /// Compare sqrt(n) W_1 with the simulated Gaussian limit law.
    Clt(CltArgs),
}

#[derive(Args, Debug)]
pub struct DistanceArgs {
    /// One-column CSV of reals (no header; `#` starts a comment).
    #[arg(long)]
    pub sample: PathBuf,
    /// Reference law: uniform, uniform:LO:HI, point:C, pareto:P, exponential[:RATE].
    #[arg(long, default_value = "uniform")]
    pub law: String,
    /// Transport order r >= 1.
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Report the integral majorant of W_r instead of W_r.
    #[arg(long)]
    pub majorant: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Process: lsv:GAMMA, doubling, iid:LAW or mdep:M.
    #[arg(long)]
    pub process: String,
    /// Observable: identity, zero:B[:C[:BETA]] or one:B[:C[:BETA]].
    #[arg(long, default_value = "identity")]
    pub observable: String,
    /// Trajectory length.
    #[arg(long)]
    pub n: usize,
    /// Discarded initial steps (process default when omitted).
    #[arg(long)]
    pub burn_in: Option<u64>,
    /// File name inside the output directory.
    #[arg(long, default_value = "trajectory.csv")]
    pub file: String,
}

#[derive(Args, Debug)]
pub struct RatesArgs {
    /// TOML experiment description.
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Args, Debug)]
pub struct AlphaArgs {
    /// Map: lsv:GAMMA or doubling.
    #[arg(long)]
    pub map: String,
    /// Observable, as for `simulate`.
    #[arg(long, default_value = "identity")]
    pub observable: String,
    /// Number of Ulam bins.
    #[arg(long, default_value_t = 4096)]
    pub m: usize,
    /// Comma-separated lags.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4, 8, 16, 32, 64, 128, 256])]
    pub lags: Vec<usize>,
    /// Mesh: uniform, or graded towards the neutral fixed point.
    #[arg(long)]
    pub mesh: Option<String>,
    /// Thresholds the supremum is taken over.
    #[arg(long, default_value_t = 64)]
    pub x_grid: usize,
    /// Thresholds per coordinate for the two-point coefficient (cost grows with its square).
    #[arg(long, default_value_t = 16)]
    pub pair_grid: usize,
    /// Skip the two-point coefficient.
    #[arg(long)]
    pub no_alpha2: bool,
}

#[derive(Args, Debug)]
pub struct CltArgs {
    /// Process, as for `simulate`.
    #[arg(long)]
    pub process: String,
    /// Observable, as for `simulate`.
    #[arg(long, default_value = "identity")]
    pub observable: String,
    /// Sample size of each replica.
    #[arg(long, default_value_t = 4096)]
    pub n: usize,
    /// Replicas of sqrt(n) W_1.
    #[arg(long, default_value_t = 2000)]
    pub replicas: usize,
    /// Cells of the kernel grid.
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    /// Lag cutoff of the kernel estimate (0 for iid processes by default, 100 otherwise).
    #[arg(long)]
    pub lag_cutoff: Option<usize>,
    /// Length of the trajectory the kernel is estimated from.
    #[arg(long, default_value_t = 1_000_000)]
    pub kernel_length: usize,
    /// Draws from the limit law.
    #[arg(long, default_value_t = 20_000)]
    pub limit_samples: usize,
    /// KS distance below which the comparison passes.
    #[arg(long, default_value_t = 0.05)]
    pub threshold: f64,
}

pub struct Global {
    pub seed: Option<u64>,
    pub out: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::input("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::input(e.to_string()))?;
    }
    let global = Global {
        seed: cli.seed,
        out: cli.out,
    };
    match cli.command {
        Command::Distance(a) => commands::distance(&global, &a),
        Command::Simulate(a) => commands::simulate(&global, &a),
        Command::Rates(a) => commands::rates(&global, &a),
        Command::Alpha(a) => commands::alpha(&global, &a),
        Command::Clt(a) => commands::clt(&global, &a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
