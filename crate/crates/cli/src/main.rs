mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kspm_core::Method;

/// Stochastic chemotaxis with porous-medium diffusion on the unit square.
#[derive(Parser, Debug)]
#[command(name = "kspm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one noise path and write snapshots plus summary.csv
    Simulate(RunArgs),
    /// Run a path ensemble and write moments.csv
    Ensemble(RunArgs),
    /// Picard iteration on one path, written to iterations.csv
    FixedPoint(RunArgs),
    /// Run the built-in invariant suite
    Verify {
        /// Accepted for uniformity; the suite uses its own small problems
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate norms of snapshot files
    Norms(NormArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paths: Option<usize>,
    /// Cells per axis
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
}

#[derive(Args, Debug, Clone)]
pub struct NormArgs {
    /// Snapshot file(s) to measure
    #[arg(long = "snapshot", required = true)]
    pub snapshots: Vec<PathBuf>,
    /// lp:P, hs:S, bessel:S:P or grad:P; repeatable
    #[arg(long = "norm", required = true)]
    pub norms: Vec<String>,
    /// Optional; only checked for consistency with the snapshot grid
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
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
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Ensemble(a) => commands::ensemble(&a),
        Command::FixedPoint(a) => commands::fixed_point(&a),
        Command::Verify { .. } => commands::verify(),
        Command::Norms(a) => commands::norms(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
