//! Experiment runner: reads a JSON configuration, runs one experiment and
//! writes `<experiment>.csv` plus `<experiment>.manifest.json` into the output
//! directory.

pub mod config;
pub mod experiments;
pub mod report;

use std::path::PathBuf;
use std::time::Instant;

use config::{ExperimentConfig, ExperimentKind, Params};
use report::{emit_report, write_manifest, Manifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{source}")]
    Module {
        module: &'static str,
        #[source]
        source: wbopt_core::Error,
    },
}

impl CliError {
    /// Component that failed: `config`, `io` or a core module name.
    pub fn origin(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Module { module, .. } => module,
        }
    }

    /// Single-line JSON description for stderr.
    pub fn to_line(&self) -> String {
        serde_json::json!({"error": self.origin(), "message": self.to_string()}).to_string()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub csv_bytes: Vec<u8>,
}

/// Runs the experiment on the current rayon pool and writes its reports.
pub fn run_config(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let start = Instant::now();
    let module_err = |source| CliError::Module {
        module: cfg.experiment.module(),
        source,
    };
    let (table, details) = match &cfg.params {
        Params::Case1(p) => experiments::case1_sweep(cfg.seed, p),
        Params::Case2(p) => experiments::case2_unfold(cfg.seed, p),
        Params::Redunet(p) => experiments::redunet_demo(cfg.seed, p),
        Params::CrateBlock(p) => experiments::crate_block(cfg.seed, p),
        Params::Ib(p) => experiments::ib_sweep_run(cfg.seed, p),
        Params::Horizon(p) => experiments::horizon_sweep(p),
        Params::Bp(p) => experiments::bp_run(p),
    }
    .map_err(module_err)?;

    let name = cfg.experiment.name();
    let csv_path = cfg.output_path.join(format!("{name}.csv"));
    let manifest_path = cfg.output_path.join(format!("{name}.manifest.json"));
    let csv_bytes = table.to_csv_bytes()?;
    emit_report(&table, &csv_path)?;
    let manifest = Manifest {
        experiment: name.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.to_json(),
        csv: csv_path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default(),
        wall_time_s: start.elapsed().as_secs_f64(),
        details,
    };
    write_manifest(&manifest, &manifest_path)?;
    Ok(RunOutput {
        csv_path,
        manifest_path,
        csv_bytes,
    })
}

/// Runs on a dedicated pool of `threads` workers.
pub fn run_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<RunOutput, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run_config(cfg))
}

/// Subcommand name of an experiment kind.
pub fn subcommand_name(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Case1Sweep => "case1-sweep",
        ExperimentKind::Case2Unfold => "case2-unfold",
        ExperimentKind::RedunetDemo => "redunet",
        ExperimentKind::CrateBlock => "crate-block",
        ExperimentKind::IbSweep => "ib-sweep",
        ExperimentKind::HorizonSweep => "horizon",
        ExperimentKind::BpRun => "bp",
    }
}
