//! Command-line designer and validator for zero-delay transmission of a
//! Gaussian sample over an AWGN channel with a one-bit receiver front end
//! and correlated side information at the decoder.
//!
//! Subcommands:
//! * `optimize` — design one encoder/decoder pair (power-targeted or at a
//!   fixed Lagrange weight) and write mapping/decoder/summary CSVs;
//! * `sweep` — trace performance curves over an SNR or correlation axis for
//!   any of the schemes {noe, plt, pbt, slb, elb}, as one tidy CSV;
//! * `validate` — Monte-Carlo check a stored mapping/decoder pair against
//!   the quadrature value, pass/fail at four standard errors.

mod manifest;
mod ops;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use onebit_jscc::Criterion;

#[derive(Parser)]
#[command(name = "onebit-jscc", version, about, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design an encoder mapping and matched decoder table
    Optimize(OptimizeArgs),
    /// Trace performance curves over an SNR or correlation axis
    Sweep(SweepArgs),
    /// Monte-Carlo validation of a stored mapping/decoder pair
    Validate(ValidateArgs),
}

/// System model parameters shared by every subcommand.
#[derive(Args)]
struct ModelArgs {
    /// Source standard deviation
    #[arg(long, default_value_t = 1.0)]
    sigma_v: f64,
    /// Side-information standard deviation
    #[arg(long, default_value_t = 1.0)]
    sigma_u: f64,
    /// Channel noise standard deviation
    #[arg(long, default_value_t = 1.0)]
    sigma_w: f64,
    /// Source/side-information correlation coefficient in [-1, 1]
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    r: f64,
    /// Design criterion: mean squared error or distortion outage probability
    #[arg(long, value_enum)]
    criterion: CriterionArg,
    /// Outage distortion threshold (required for --criterion dop)
    #[arg(long)]
    d_target: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    Mse,
    Dop,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Criterion {
        match c {
            CriterionArg::Mse => Criterion::Mse,
            CriterionArg::Dop => Criterion::Dop,
        }
    }
}

/// Quadrature grid controls (both the source and side-information grids use
/// the same node count and halfwidth, each scaled by its own sigma).
#[derive(Args)]
struct GridArgs {
    /// Number of grid nodes (odd, >= 3)
    #[arg(long, default_value_t = 1001)]
    grid_n: usize,
    /// Grid halfwidth in standard deviations (>= 4)
    #[arg(long, default_value_t = 5.0)]
    grid_halfwidth: f64,
}

/// Descent knobs; unset values fall back to criterion-specific defaults.
#[derive(Args)]
struct DescentArgs {
    /// Initial gradient step size
    #[arg(long)]
    step_size: Option<f64>,
    /// Maximum accepted descent steps per start
    #[arg(long)]
    max_iters: Option<usize>,
    /// Gradient sup-norm stopping tolerance
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("budget").required(true).args(["power", "lambda"])))]
struct OptimizeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    descent: DescentArgs,
    /// Average power target (the Lagrange weight is found by bisection)
    #[arg(long)]
    power: Option<f64>,
    /// Fixed Lagrange weight (no power search)
    #[arg(long)]
    lambda: Option<f64>,
    /// Output directory (mapping.csv, decoder.csv, summary.csv, manifest.txt)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Axis {
    /// Signal-to-noise ratio axis, points in dB
    Snr,
    /// Correlation-coefficient axis
    R,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    descent: DescentArgs,
    /// Sweep axis
    #[arg(long, value_enum, default_value_t = Axis::Snr)]
    axis: Axis,
    /// Schemes to evaluate (comma-separated subset of noe,plt,pbt,slb,elb);
    /// defaults to every scheme defined for the criterion
    #[arg(long, value_delimiter = ',')]
    schemes: Vec<String>,
    /// Average power target (required for --axis r; forbidden for --axis
    /// snr, where power is the axis)
    #[arg(long)]
    power: Option<f64>,
    /// Axis lower end (default: -10 dB for snr, 0 for r)
    #[arg(long, allow_hyphen_values = true)]
    axis_min: Option<f64>,
    /// Axis upper end (default: 20 dB for snr, 0.95 for r)
    #[arg(long, allow_hyphen_values = true)]
    axis_max: Option<f64>,
    /// Number of axis points (default: 20 for snr, 11 for r)
    #[arg(long)]
    axis_points: Option<usize>,
    /// Concurrent sweep points (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory (sweep.csv, manifest.txt)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Mapping CSV (header v,f)
    #[arg(long)]
    mapping: PathBuf,
    /// Decoder CSV (header u,g0,g1)
    #[arg(long)]
    decoder: PathBuf,
    /// Monte-Carlo sample count
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    /// Simulation seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional output directory (mc_summary.csv, manifest.txt)
    #[arg(long)]
    out: Option<PathBuf>,
}

/// CLI failure modes, each with its exit code.
#[derive(Debug)]
enum CliError {
    /// Bad flag value or combination: exit 2, message names the flag.
    Usage(String),
    /// Computation or I/O failure: exit 1.
    Run(onebit_jscc::Error),
    /// The validation gate failed (report already printed): exit 1.
    ValidationFailed,
}

impl From<onebit_jscc::Error> for CliError {
    fn from(e: onebit_jscc::Error) -> Self {
        CliError::Run(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Optimize(args) => ops::cmd_optimize(args),
        Command::Sweep(args) => ops::cmd_sweep(args),
        Command::Validate(args) => ops::cmd_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(CliError::ValidationFailed) => ExitCode::from(1),
    }
}
