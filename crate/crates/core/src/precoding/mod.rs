//! Precoding optimizers whose every iterate can be inspected.
//!
//! * [`mrt`] and [`wmmse_sum_se`] are the unicast sum-SE baselines.
//! * [`smoothed_min_rate`] is the multicast objective: a log-sum-exp soft
//!   minimum of all per-user SEs, so the worst user of every group drives it.
//! * [`pgd_run`] unrolls projected gradient ascent on that objective into
//!   `L` layers with one step size per layer, and [`train_unfolded`] fits
//!   those step sizes on a seeded channel ensemble.

mod baseline;
mod nelder_mead;
mod objective;
mod unfolded;

pub use baseline::{
    equal_power_columns, matched_filter_init, mrt, wmmse_from, wmmse_sum_se, WmmseConfig,
};
pub use nelder_mead::{nelder_mead_maximize, NelderMeadConfig, NelderMeadResult};
pub use objective::{
    smoothed_min_rate, smoothed_min_rate_gradient, smoothed_min_rate_with_gradient, softmin,
};
pub use unfolded::{
    compare_schedules, constant_step_grid, evaluate_schedule, pgd_iterate, pgd_run, train_unfolded,
    CandidateRecord, CandidateSource, ComparisonRow, EnsembleMember, TrainConfig, TrainingInfo,
    TrainingReport, UnfoldedSchedule, DEFAULT_TAU_SOFT,
};

/// Per-iteration record of an optimizer run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizerTrace {
    /// Objective before the first iteration.
    pub initial_objective: f64,
    /// Objective after each iteration.
    pub objective: Vec<f64>,
    /// Total transmit power after each iteration.
    pub power: Vec<f64>,
}

impl OptimizerTrace {
    pub fn iterations(&self) -> usize {
        self.objective.len()
    }

    pub fn final_objective(&self) -> f64 {
        self.objective
            .last()
            .copied()
            .unwrap_or(self.initial_objective)
    }

    fn push(&mut self, objective: f64, power: f64) {
        self.objective.push(objective);
        self.power.push(power);
    }
}
