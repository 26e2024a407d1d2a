use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use vqoco_cli::config::{AlgorithmKind, Command};
use vqoco_cli::{execute, CliError, Overrides, RunConfig};

/// Online convex optimization with long-term constraints: seeded runs,
/// comparisons, parameter tuning and the doubling wrapper.
#[derive(Debug, Parser)]
#[command(name = "vqoco", version)]
struct Args {
    /// Command to run; overrides the config file's `command`.
    #[arg(value_enum)]
    command: Option<Command>,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Horizon.
    #[arg(long = "T")]
    horizon: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmKind>,
    /// Trade-off exponent of the primal-dual baseline, in (0, 1).
    #[arg(long = "theta-exp")]
    theta_exp: Option<f64>,
    /// Skip the SVG charts.
    #[arg(long = "no-plots")]
    no_plots: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(args: Args) -> Result<ExitCode, CliError> {
    let text = match &args.config {
        Some(p) => Some(
            std::fs::read_to_string(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };
    let overrides = Overrides {
        command: args.command,
        seed: args.seed,
        horizon: args.horizon,
        out: args.out,
        algorithm: args.algorithm,
        theta_exp: args.theta_exp,
        no_plots: args.no_plots,
    };
    let cfg = RunConfig::from_sources(text.as_deref(), &overrides)?;
    let outcome = execute(&cfg)?;
    print!("{}", outcome.report);
    match outcome.failure {
        Some(e) => {
            eprintln!("error: {e}");
            Ok(ExitCode::from(e.exit_code() as u8))
        }
        None => Ok(ExitCode::SUCCESS),
    }
}
