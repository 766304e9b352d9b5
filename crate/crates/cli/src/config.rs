//! Experiment configuration documents.
//!
//! ```json
//! {"experiment": "case2_unfold", "seed": 7, "output_path": "results",
//!  "params": {"layers": 10}}
//! ```
//!
//! Every object rejects keys it does not know. Missing parameters take the
//! defaults below.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use wbopt_core::beliefprop::{Factor, FactorGraph};
use wbopt_core::cellfree::Scenario;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Case1Sweep,
    Case2Unfold,
    RedunetDemo,
    CrateBlock,
    IbSweep,
    HorizonSweep,
    BpRun,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        Self::Case1Sweep,
        Self::Case2Unfold,
        Self::RedunetDemo,
        Self::CrateBlock,
        Self::IbSweep,
        Self::HorizonSweep,
        Self::BpRun,
    ];

    /// Name used in configs and file names.
    pub fn name(self) -> &'static str {
        match self {
            Self::Case1Sweep => "case1_sweep",
            Self::Case2Unfold => "case2_unfold",
            Self::RedunetDemo => "redunet_demo",
            Self::CrateBlock => "crate_block",
            Self::IbSweep => "ib_sweep",
            Self::HorizonSweep => "horizon_sweep",
            Self::BpRun => "bp_run",
        }
    }

    /// Core module that does the numeric work.
    pub fn module(self) -> &'static str {
        match self {
            Self::Case1Sweep | Self::Case2Unfold => "precoding",
            Self::RedunetDemo | Self::CrateBlock => "ratereduction",
            Self::IbSweep => "infobottleneck",
            Self::HorizonSweep => "horizonopt",
            Self::BpRun => "beliefprop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Case1Params {
    pub scenario: Scenario,
    pub noise_powers: Vec<f64>,
    pub num_channels: usize,
    pub wmmse_max_iters: usize,
    pub wmmse_tol: f64,
}

impl Default for Case1Params {
    fn default() -> Self {
        Self {
            scenario: Scenario::case1(),
            noise_powers: vec![0.01, 0.1, 1.0, 10.0],
            num_channels: 100,
            wmmse_max_iters: 100,
            wmmse_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Case2Params {
    pub scenario: Scenario,
    pub layers: usize,
    pub train_channels: usize,
    pub test_channels: usize,
    pub tau_csi: Vec<f64>,
    pub tau_soft: f64,
    /// Untrained reference step.
    pub default_step: f64,
    pub max_evals: usize,
}

impl Default for Case2Params {
    fn default() -> Self {
        Self {
            scenario: Scenario::case2(),
            layers: 10,
            train_channels: 200,
            test_channels: 200,
            tau_csi: vec![0.0, 0.1, 0.2],
            tau_soft: wbopt_core::precoding::DEFAULT_TAU_SOFT,
            default_step: 0.1,
            max_evals: 600,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RedunetParams {
    pub dim: usize,
    pub per_class: usize,
    pub separation: f64,
    pub noise_std: f64,
    pub epsilon_sq: f64,
    pub layers: usize,
    pub eta: f64,
    pub assignment_sharpness: f64,
    pub subspace_dim: usize,
}

impl Default for RedunetParams {
    fn default() -> Self {
        let m = wbopt_core::ratereduction::MixtureSpec::default();
        Self {
            dim: m.dim,
            per_class: m.per_class,
            separation: m.separation,
            noise_std: m.noise_std,
            epsilon_sq: m.epsilon_sq,
            layers: 20,
            eta: 0.5,
            assignment_sharpness: wbopt_core::ratereduction::DEMO_ASSIGNMENT_SHARPNESS,
            subspace_dim: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrateBlockParams {
    pub dim: usize,
    pub tokens: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub atoms: usize,
    pub mssa_step: f64,
    pub sparsity_weight: f64,
    /// ISTA step as a fraction of `1 / sigma_max(D)^2`.
    pub ista_step_fraction: f64,
    pub ista_iters: usize,
}

impl Default for CrateBlockParams {
    fn default() -> Self {
        Self {
            dim: 16,
            tokens: 32,
            heads: 4,
            head_dim: 4,
            atoms: 32,
            mssa_step: 0.5,
            sparsity_weight: 0.1,
            ista_step_fraction: 0.9,
            ista_iters: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IbParams {
    /// Joint `p(x, y)` as rows over `x`.
    pub joint: Vec<Vec<f64>>,
    pub betas: Vec<f64>,
    /// Defaults to `|X|`.
    pub z_card: Option<usize>,
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub warm_start: bool,
}

impl Default for IbParams {
    fn default() -> Self {
        let d = wbopt_core::infobottleneck::IbSweepConfig::default();
        Self {
            joint: vec![
                vec![0.20, 0.04, 0.01],
                vec![0.05, 0.15, 0.05],
                vec![0.01, 0.09, 0.15],
                vec![0.06, 0.04, 0.15],
            ],
            betas: (0..25)
                .map(|i| 10f64.powf(-1.0 + 0.125 * i as f64))
                .collect(),
            z_card: d.z_card,
            restarts: d.restarts,
            max_iters: d.max_iters,
            tol: d.tol,
            warm_start: d.warm_start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HorizonParams {
    pub mu: f64,
    pub l: f64,
    pub max_t: usize,
}

impl Default for HorizonParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            l: 10.0,
            max_t: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BpParams {
    pub graph: FactorGraph,
    pub max_iters: usize,
    pub damping: f64,
    pub tol: f64,
}

impl Default for BpParams {
    fn default() -> Self {
        // binary chain x0 - x1 - x2 with evidence on both ends
        let agree = vec![0.9, 0.1, 0.1, 0.9];
        Self {
            graph: FactorGraph {
                cardinalities: vec![2, 2, 2],
                factors: vec![
                    Factor {
                        vars: vec![0, 1],
                        table: agree.clone(),
                    },
                    Factor {
                        vars: vec![1, 2],
                        table: agree,
                    },
                    Factor {
                        vars: vec![0],
                        table: vec![0.7, 0.3],
                    },
                    Factor {
                        vars: vec![2],
                        table: vec![0.4, 0.6],
                    },
                ],
            },
            max_iters: 100,
            damping: 0.0,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    Case1(Case1Params),
    Case2(Case2Params),
    Redunet(RedunetParams),
    CrateBlock(CrateBlockParams),
    Ib(IbParams),
    Horizon(HorizonParams),
    Bp(BpParams),
}

/// A fully resolved configuration; serializing it reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub output_path: PathBuf,
    pub params: Params,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: ExperimentKind,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_output")]
    output_path: PathBuf,
    #[serde(default)]
    params: Option<serde_json::Value>,
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

/// Turns serde's "unknown field `x`" into "unknown key: x".
fn describe(e: serde_json::Error) -> String {
    let msg = e.to_string();
    if let Some(rest) = msg.strip_prefix("unknown field `") {
        if let Some(end) = rest.find('`') {
            return format!("unknown key: {}", &rest[..end]);
        }
    }
    msg
}

fn typed<T: serde::de::DeserializeOwned + Default>(
    v: Option<serde_json::Value>,
) -> Result<T, CliError> {
    match v {
        None | Some(serde_json::Value::Null) => Ok(T::default()),
        Some(v) => serde_json::from_value(v).map_err(|e| CliError::Config(describe(e))),
    }
}

impl ExperimentConfig {
    /// Defaults for `kind`.
    pub fn default_for(kind: ExperimentKind) -> Self {
        Self::resolve(kind, 0, default_output(), None).expect("defaults are valid")
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(describe(e)))?;
        Self::resolve(raw.experiment, raw.seed, raw.output_path, raw.params)
    }

    fn resolve(
        kind: ExperimentKind,
        seed: u64,
        output_path: PathBuf,
        params: Option<serde_json::Value>,
    ) -> Result<Self, CliError> {
        let params = match kind {
            ExperimentKind::Case1Sweep => Params::Case1(typed(params)?),
            ExperimentKind::Case2Unfold => Params::Case2(typed(params)?),
            ExperimentKind::RedunetDemo => Params::Redunet(typed(params)?),
            ExperimentKind::CrateBlock => Params::CrateBlock(typed(params)?),
            ExperimentKind::IbSweep => Params::Ib(typed(params)?),
            ExperimentKind::HorizonSweep => Params::Horizon(typed(params)?),
            ExperimentKind::BpRun => Params::Bp(typed(params)?),
        };
        Ok(Self {
            experiment: kind,
            seed,
            output_path,
            params,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
