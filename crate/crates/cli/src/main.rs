//! `selfsim`: simulate, ingest, analyze, compare and calibrate from JSON
//! run configurations.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

const AFTER_HELP: &str = "\
Output files (all CSVs carry a header row):
  simulate   ensemble.csv (history,r1..rn) + ensemble.json sidecar
  ingest     ensemble.csv + ensemble.json + ingest_report.json
  analyze    increment_m2.csv, moments.csv, linear.csv, kappa.csv,
             vol_autocorr.csv, K.csv  (kind,source,alpha,beta,i,j,value,err)
             collapse.csv (t,T,scale,bin,center,density), d_estimate.json
  compare    comparison.csv (statistic,i,j,empirical,err,theory,z) + comparison.json
  calibrate  model.json";

#[derive(Parser)]
#[command(name = "selfsim", version, about = "Self-similar return process toolkit", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Seed for every random stream; overrides the config's "seed".
    #[arg(long)]
    seed: Option<u64>,
    /// Only report errors.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an ensemble from a model.
    Simulate(CommonArgs),
    /// Build an ensemble from intraday prices.
    Ingest(CommonArgs),
    /// Empirical statistics of an ensemble.
    Analyze(CommonArgs),
    /// Theory against empirics with bootstrap error bars.
    Compare(CommonArgs),
    /// Fit the volatility measure to moment targets.
    Calibrate(CommonArgs),
}

type Runner = fn(&commands::Common) -> Result<(), Failure>;

pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run): (CommonArgs, Runner) = match cli.command {
        Command::Simulate(a) => (a, commands::simulate),
        Command::Ingest(a) => (a, commands::ingest),
        Command::Analyze(a) => (a, commands::analyze),
        Command::Compare(a) => (a, commands::compare_cmd),
        Command::Calibrate(a) => (a, commands::calibrate_cmd),
    };
    let level = if args.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let common = commands::Common {
        config: args.config,
        out: args.out,
        seed: args.seed,
        quiet: args.quiet,
    };
    match run(&common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
