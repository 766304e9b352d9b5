use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baseline::matched_filter_init;
use super::nelder_mead::{nelder_mead_maximize, NelderMeadConfig};
use super::objective::{smoothed_min_rate_with_gradient, softmin};
use super::OptimizerTrace;
use crate::cellfree::{
    corrupt_csi, draw_channel, project_power_in_place, sinr_and_se, ChannelRealization,
    PrecoderSet, Scenario,
};
use crate::error::{invalid, Result};
use crate::numkernel::RngStream;

/// Softmin temperature used unless configured otherwise.
pub const DEFAULT_TAU_SOFT: f64 = 0.05;

const FEASIBILITY_TOL: f64 = 1e-9;

/// How a trained schedule was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub seed: u64,
    pub stream_id: u64,
    pub train_channels: usize,
    /// Mean smoothed min-rate on the training ensemble.
    pub objective: f64,
    pub evaluations: usize,
}

/// Per-layer step sizes of an unrolled PGD network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnfoldedSchedule {
    pub layer_steps: Vec<f64>,
    pub smoothing_temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingInfo>,
}

impl UnfoldedSchedule {
    pub fn new(layer_steps: Vec<f64>, smoothing_temperature: f64) -> Result<Self> {
        if layer_steps.is_empty() {
            return Err(invalid("a schedule needs at least one layer"));
        }
        if layer_steps.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(invalid("layer steps must be positive and finite"));
        }
        if !(smoothing_temperature > 0.0 && smoothing_temperature.is_finite()) {
            return Err(invalid("smoothing temperature must be positive"));
        }
        Ok(Self {
            layer_steps,
            smoothing_temperature,
            training: None,
        })
    }

    pub fn constant(step: f64, layers: usize, smoothing_temperature: f64) -> Result<Self> {
        Self::new(vec![step; layers], smoothing_temperature)
    }

    pub fn layers(&self) -> usize {
        self.layer_steps.len()
    }
}

/// Projected gradient ascent with an explicit step per layer:
/// `w <- project_power(w + step_l * grad f(w))`. Steps may be zero.
pub fn pgd_iterate(
    h: &ChannelRealization,
    scenario: &Scenario,
    steps: &[f64],
    tau_soft: f64,
    w0: &PrecoderSet,
) -> Result<(PrecoderSet, OptimizerTrace)> {
    if steps.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(invalid("steps must be nonnegative and finite"));
    }
    if !w0.is_feasible(scenario, FEASIBILITY_TOL) {
        return Err(invalid(
            "initial precoder violates a per-station power budget",
        ));
    }
    let mut w = w0.clone();
    let (v0, mut grad) = smoothed_min_rate_with_gradient(h, &w, scenario, tau_soft)?;
    let mut trace = OptimizerTrace {
        initial_objective: v0,
        ..OptimizerTrace::default()
    };
    for &step in steps {
        if step > 0.0 {
            w.w = w.w.add_scaled(Complex64::new(step, 0.0), &grad)?;
            project_power_in_place(&mut w, scenario);
        }
        let (v, g) = smoothed_min_rate_with_gradient(h, &w, scenario, tau_soft)?;
        grad = g;
        trace.push(v, w.total_power());
    }
    Ok((w, trace))
}

pub fn pgd_run(
    h: &ChannelRealization,
    scenario: &Scenario,
    schedule: &UnfoldedSchedule,
    w0: &PrecoderSet,
) -> Result<(PrecoderSet, OptimizerTrace)> {
    pgd_iterate(
        h,
        scenario,
        &schedule.layer_steps,
        schedule.smoothing_temperature,
        w0,
    )
}

/// Log-spaced constant steps `10^-3, 10^-2.75, ..., 10^0`.
pub fn constant_step_grid() -> Vec<f64> {
    (0..13)
        .map(|i| 10f64.powf(-3.0 + 0.25 * i as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub tau_soft: f64,
    /// Constant steps evaluated before refinement.
    pub grid: Vec<f64>,
    /// Refinement over `log10` of the layer steps.
    pub nelder_mead: NelderMeadConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            tau_soft: DEFAULT_TAU_SOFT,
            grid: constant_step_grid(),
            nelder_mead: NelderMeadConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    Grid,
    NelderMead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRecord {
    pub steps: Vec<f64>,
    pub objective: f64,
    pub source: CandidateSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    pub schedule: UnfoldedSchedule,
    /// Every schedule evaluated during the search, in order.
    pub candidates: Vec<CandidateRecord>,
}

impl TrainingReport {
    /// Best constant-grid candidate.
    pub fn best_constant(&self) -> Option<&CandidateRecord> {
        self.candidates
            .iter()
            .filter(|c| c.source == CandidateSource::Grid)
            .fold(None, |best: Option<&CandidateRecord>, c| match best {
                Some(b) if b.objective >= c.objective => Some(b),
                _ => Some(c),
            })
    }
}

/// A channel paired with its PGD starting point.
pub type EnsembleMember = (ChannelRealization, PrecoderSet);

fn draw_ensemble(
    scenario: &Scenario,
    count: usize,
    rng: &RngStream,
) -> Result<Vec<EnsembleMember>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let h = draw_channel(scenario, &mut rng.substream(i as u64))?;
            let w0 = matched_filter_init(&h, scenario)?;
            Ok((h, w0))
        })
        .collect()
}

/// Mean smoothed min-rate after running `steps` on every ensemble member.
/// Members are evaluated in parallel and summed in index order.
pub fn evaluate_schedule(
    ensemble: &[EnsembleMember],
    scenario: &Scenario,
    steps: &[f64],
    tau_soft: f64,
) -> Result<f64> {
    let values: Vec<f64> = ensemble
        .par_iter()
        .map(|(h, w0)| {
            pgd_iterate(h, scenario, steps, tau_soft, w0).map(|(_, t)| t.final_objective())
        })
        .collect::<Result<_>>()?;
    Ok(values.iter().sum::<f64>() / values.len().max(1) as f64)
}

/// Fits the `layers` step sizes to maximize the mean smoothed min-rate over
/// `train_channels` seeded channels.
///
/// Every constant schedule of `cfg.grid` is evaluated first; Nelder-Mead then
/// refines the `log10` step vector starting from the best constant, with the
/// same channels for every evaluation. The best evaluated candidate wins, so
/// the result is never worse than any grid constant on the training set.
pub fn train_unfolded(
    scenario: &Scenario,
    layers: usize,
    train_channels: usize,
    rng: &RngStream,
    cfg: &TrainConfig,
) -> Result<TrainingReport> {
    scenario.validate()?;
    if layers == 0 || train_channels == 0 {
        return Err(invalid("layers and train_channels must be at least 1"));
    }
    if cfg.grid.is_empty() || cfg.grid.iter().any(|s| s.is_nan() || *s <= 0.0) {
        return Err(invalid(
            "the constant-step grid must be non-empty and positive",
        ));
    }
    let ensemble = draw_ensemble(scenario, train_channels, rng)?;

    let mut candidates = Vec::new();
    for &step in &cfg.grid {
        let steps = vec![step; layers];
        let objective = evaluate_schedule(&ensemble, scenario, &steps, cfg.tau_soft)?;
        candidates.push(CandidateRecord {
            steps,
            objective,
            source: CandidateSource::Grid,
        });
    }
    let start = candidates
        .iter()
        .fold(&candidates[0], |b, c| {
            if c.objective > b.objective {
                c
            } else {
                b
            }
        })
        .steps[0];

    let mut failure = None;
    let refined = nelder_mead_maximize(
        |x| {
            let steps: Vec<f64> = x.iter().map(|e| 10f64.powf(*e)).collect();
            match evaluate_schedule(&ensemble, scenario, &steps, cfg.tau_soft) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            }
        },
        &vec![start.log10(); layers],
        &cfg.nelder_mead,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    candidates.extend(
        refined
            .log
            .into_iter()
            .map(|(x, objective)| CandidateRecord {
                steps: x.iter().map(|e| 10f64.powf(*e)).collect(),
                objective,
                source: CandidateSource::NelderMead,
            }),
    );

    let best = candidates.iter().fold(&candidates[0], |b, c| {
        if c.objective > b.objective {
            c
        } else {
            b
        }
    });
    let mut schedule = UnfoldedSchedule::new(best.steps.clone(), cfg.tau_soft)?;
    schedule.training = Some(TrainingInfo {
        seed: rng.seed(),
        stream_id: rng.stream_id(),
        train_channels,
        objective: best.objective,
        evaluations: candidates.len(),
    });
    Ok(TrainingReport {
        schedule,
        candidates,
    })
}

/// Aggregate test-ensemble statistics of one schedule at one CSI error level.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub scheme: String,
    pub tau_csi: f64,
    pub layers: usize,
    pub mean_min_se: f64,
    pub std_min_se: f64,
    pub mean_total_se: f64,
    pub std_total_se: f64,
    /// Mean smoothed min-rate on the true channels.
    pub mean_smoothed: f64,
    pub num_channels: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Evaluates every schedule on `test_channels` seeded channels at every CSI
/// error level. Precoders are computed from the corrupted estimate and rated
/// on the true channel. One error draw per channel is shared by all levels
/// and schedules. Rows are ordered by CSI level, then schedule.
///
/// `rng` must not be the stream used for training.
pub fn compare_schedules(
    scenario: &Scenario,
    schedules: &[(String, UnfoldedSchedule)],
    test_channels: usize,
    tau_csi_list: &[f64],
    rng: &RngStream,
) -> Result<Vec<ComparisonRow>> {
    scenario.validate()?;
    if test_channels == 0 {
        return Err(invalid("test_channels must be at least 1"));
    }
    if let Some(t) = tau_csi_list.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(invalid(format!("tau_csi {t} outside [0, 1]")));
    }
    // per channel: [tau][schedule] -> (min_se, total_se, smoothed)
    let per_channel: Vec<Vec<Vec<(f64, f64, f64)>>> = (0..test_channels)
        .into_par_iter()
        .map(|i| {
            let mut channel_rng = rng.substream(i as u64);
            let error_rng = channel_rng.substream(0);
            let h = draw_channel(scenario, &mut channel_rng)?;
            tau_csi_list
                .iter()
                .map(|&tau| {
                    let estimate = corrupt_csi(&h, tau, &mut error_rng.clone())?;
                    let w0 = matched_filter_init(&estimate, scenario)?;
                    schedules
                        .iter()
                        .map(|(_, sched)| {
                            let (w, _) = pgd_run(&estimate, scenario, sched, &w0)?;
                            let m = sinr_and_se(&h, &w, scenario)?;
                            Ok((
                                m.min_se,
                                m.total_se,
                                softmin(&m.se, sched.smoothing_temperature),
                            ))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(tau_csi_list.len() * schedules.len());
    for (t, &tau) in tau_csi_list.iter().enumerate() {
        for (s, (name, sched)) in schedules.iter().enumerate() {
            let pick = |f: fn(&(f64, f64, f64)) -> f64| -> Vec<f64> {
                per_channel.iter().map(|c| f(&c[t][s])).collect()
            };
            let (mean_min_se, std_min_se) = mean_std(&pick(|v| v.0));
            let (mean_total_se, std_total_se) = mean_std(&pick(|v| v.1));
            let (mean_smoothed, _) = mean_std(&pick(|v| v.2));
            rows.push(ComparisonRow {
                scheme: name.clone(),
                tau_csi: tau,
                layers: sched.layers(),
                mean_min_se,
                std_min_se,
                mean_total_se,
                std_total_se,
                mean_smoothed,
                num_channels: test_channels,
            });
        }
    }
    Ok(rows)
}
