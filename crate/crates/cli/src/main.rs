use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wbopt_cli::config::{ExperimentConfig, ExperimentKind};
use wbopt_cli::{run_with_threads, subcommand_name, CliError};

#[derive(Parser)]
#[command(
    name = "wbopt",
    version,
    about = "Run a seeded experiment and write CSV plus a JSON manifest"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// MRT vs WMMSE sum-SE over noise powers.
    Case1Sweep(RunArgs),
    /// Train unfolded PGD step sizes and compare them under CSI errors.
    Case2Unfold(RunArgs),
    /// ReduNet layers on a two-class Gaussian mixture.
    Redunet(RunArgs),
    /// One MSSA pass followed by ISTA sparse coding.
    CrateBlock(RunArgs),
    /// Information-bottleneck frontier over beta.
    IbSweep(RunArgs),
    /// Chebyshev vs constant step schedules over the horizon.
    Horizon(RunArgs),
    /// Sum-product marginals of a factor graph.
    Bp(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn resolve(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default_for(kind),
    };
    if cfg.experiment != kind {
        return Err(CliError::Config(format!(
            "config describes {} but subcommand {} was given",
            cfg.experiment.name(),
            subcommand_name(kind)
        )));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_path = out.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Case1Sweep(a) => (ExperimentKind::Case1Sweep, a),
        Command::Case2Unfold(a) => (ExperimentKind::Case2Unfold, a),
        Command::Redunet(a) => (ExperimentKind::RedunetDemo, a),
        Command::CrateBlock(a) => (ExperimentKind::CrateBlock, a),
        Command::IbSweep(a) => (ExperimentKind::IbSweep, a),
        Command::Horizon(a) => (ExperimentKind::HorizonSweep, a),
        Command::Bp(a) => (ExperimentKind::BpRun, a),
    };
    let threads = args
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    match resolve(kind, args).and_then(|cfg| run_with_threads(&cfg, threads)) {
        Ok(out) => {
            println!("{}", out.csv_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_line());
            ExitCode::from(match e {
                CliError::Config(_) => 2,
                _ => 1,
            })
        }
    }
}
