//! Cell-free massive MIMO downlink model.
//!
//! Channels are stored user-major: row `k` of [`ChannelRealization::h`] is the
//! channel `h_k` from every service antenna to user `k`, with the antennas of
//! station `b` occupying columns `b*N..(b+1)*N`. The received amplitude of
//! group `g`'s stream at user `k` is `h_k^H w_g`, so matched filtering uses
//! `w_k = h_k`.
//!
//! Unicast is modeled as one singleton group per user, so every metric serves
//! both the sum-SE and the multicast setting.

use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numkernel::{sample_complex_gaussian, ComplexMatrix, RngStream};

/// Deployment and link-budget description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub num_stations: usize,
    pub antennas_per_station: usize,
    pub num_users: usize,
    /// Group index of every user; unicast uses `0..num_users`.
    pub group_assignment: Vec<usize>,
    /// Noise power in watts, relative to unit average channel gain.
    pub noise_power: f64,
    pub power_budget_per_station: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    /// Optional large-scale gain per (user, station), user-major. `None`
    /// means every link has unit gain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub large_scale_gain: Option<Vec<f64>>,
}

fn default_bandwidth() -> f64 {
    20e6
}

impl Scenario {
    /// Unicast scenario: each user is its own group.
    pub fn unicast(num_stations: usize, antennas_per_station: usize, num_users: usize) -> Self {
        Self {
            num_stations,
            antennas_per_station,
            num_users,
            group_assignment: (0..num_users).collect(),
            noise_power: 1.0,
            power_budget_per_station: 1.0,
            bandwidth_hz: default_bandwidth(),
            large_scale_gain: None,
        }
    }

    /// 10 access points with 4 antennas each serving 4 single-antenna users,
    /// 1 W per access point, 20 MHz.
    pub fn case1() -> Self {
        Self::unicast(10, 4, 4)
    }

    /// 4 base stations with 4 antennas each, 8 users in 4 multicast groups
    /// of 2, 1 W per station. Channels are i.i.d., so which users share a
    /// group is immaterial; users `2g` and `2g+1` form group `g`.
    pub fn case2() -> Self {
        Self {
            group_assignment: (0..8).map(|k| k / 2).collect(),
            ..Self::unicast(4, 4, 8)
        }
    }

    pub fn with_noise_power(mut self, noise_power: f64) -> Self {
        self.noise_power = noise_power;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_stations == 0 || self.antennas_per_station == 0 || self.num_users == 0 {
            return Err(invalid(
                "station, antenna and user counts must be at least 1",
            ));
        }
        if self.group_assignment.len() != self.num_users {
            return Err(invalid(format!(
                "group_assignment has {} entries for {} users",
                self.group_assignment.len(),
                self.num_users
            )));
        }
        let groups = self.num_groups();
        let mut seen = vec![false; groups];
        for &g in &self.group_assignment {
            seen[g] = true;
        }
        if let Some(g) = seen.iter().position(|s| !s) {
            return Err(invalid(format!("group {g} has no users")));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(invalid("noise_power must be positive and finite"));
        }
        if !(self.power_budget_per_station > 0.0 && self.power_budget_per_station.is_finite()) {
            return Err(invalid(
                "power_budget_per_station must be positive and finite",
            ));
        }
        if self.bandwidth_hz.is_nan() || self.bandwidth_hz <= 0.0 {
            return Err(invalid("bandwidth_hz must be positive"));
        }
        if let Some(g) = &self.large_scale_gain {
            if g.len() != self.num_users * self.num_stations {
                return Err(invalid(
                    "large_scale_gain must have num_users * num_stations entries",
                ));
            }
            if g.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return Err(invalid(
                    "large_scale_gain entries must be finite and nonnegative",
                ));
            }
        }
        Ok(())
    }

    pub fn total_antennas(&self) -> usize {
        self.num_stations * self.antennas_per_station
    }

    pub fn num_groups(&self) -> usize {
        self.group_assignment.iter().max().map_or(0, |&g| g + 1)
    }

    /// Antenna (row) range of station `b` in a precoder.
    pub fn station_rows(&self, b: usize) -> Range<usize> {
        b * self.antennas_per_station..(b + 1) * self.antennas_per_station
    }

    /// Members of each group, in user order.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_groups()];
        for (k, &g) in self.group_assignment.iter().enumerate() {
            out[g].push(k);
        }
        out
    }

    pub fn is_unicast(&self) -> bool {
        self.num_groups() == self.num_users && self.groups().iter().all(|g| g.len() == 1)
    }

    fn link_gain(&self, user: usize, station: usize) -> f64 {
        self.large_scale_gain
            .as_ref()
            .map_or(1.0, |g| g[user * self.num_stations + station])
    }
}

/// Channel matrix `h` of shape `num_users x total_antennas`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: ComplexMatrix,
}

impl ChannelRealization {
    pub fn new(h: ComplexMatrix, scenario: &Scenario) -> Result<Self> {
        if h.shape() != (scenario.num_users, scenario.total_antennas()) {
            return Err(invalid(format!(
                "channel shape {:?} does not match scenario ({}, {})",
                h.shape(),
                scenario.num_users,
                scenario.total_antennas()
            )));
        }
        if !h.all_finite() {
            return Err(invalid("channel has non-finite entries"));
        }
        Ok(Self { h })
    }

    pub fn num_users(&self) -> usize {
        self.h.rows()
    }

    pub fn num_antennas(&self) -> usize {
        self.h.cols()
    }

    pub fn user(&self, k: usize) -> &[Complex64] {
        self.h.row(k)
    }
}

/// Precoding matrix `w` of shape `total_antennas x num_groups`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    pub w: ComplexMatrix,
}

impl PrecoderSet {
    pub fn new(w: ComplexMatrix, scenario: &Scenario) -> Result<Self> {
        check_precoder_shape(&w, scenario)?;
        if !w.all_finite() {
            return Err(invalid("precoder has non-finite entries"));
        }
        Ok(Self { w })
    }

    pub fn zeros(scenario: &Scenario) -> Self {
        Self {
            w: ComplexMatrix::zeros(scenario.total_antennas(), scenario.num_groups()),
        }
    }

    /// Transmit power of every station, summed over groups.
    pub fn station_powers(&self, scenario: &Scenario) -> Vec<f64> {
        (0..scenario.num_stations)
            .map(|b| {
                scenario
                    .station_rows(b)
                    .map(|r| crate::numkernel::norm_sq(self.w.row(r)))
                    .sum()
            })
            .collect()
    }

    pub fn total_power(&self) -> f64 {
        self.w.frobenius_norm_sq()
    }

    pub fn is_feasible(&self, scenario: &Scenario, tol: f64) -> bool {
        self.station_powers(scenario)
            .iter()
            .all(|&p| p <= scenario.power_budget_per_station + tol)
    }
}

fn check_precoder_shape(w: &ComplexMatrix, scenario: &Scenario) -> Result<()> {
    if w.shape() != (scenario.total_antennas(), scenario.num_groups()) {
        return Err(invalid(format!(
            "precoder shape {:?} does not match scenario ({}, {})",
            w.shape(),
            scenario.total_antennas(),
            scenario.num_groups()
        )));
    }
    Ok(())
}

/// Draws i.i.d. CN(0, 1) small-scale fading, scaled by the optional
/// large-scale gains.
pub fn draw_channel(scenario: &Scenario, rng: &mut RngStream) -> Result<ChannelRealization> {
    scenario.validate()?;
    let mut h = sample_complex_gaussian(scenario.num_users, scenario.total_antennas(), rng)?;
    if scenario.large_scale_gain.is_some() {
        for k in 0..scenario.num_users {
            for b in 0..scenario.num_stations {
                let amp = scenario.link_gain(k, b).sqrt();
                for n in scenario.station_rows(b) {
                    h[(k, n)] *= Complex64::new(amp, 0.0);
                }
            }
        }
    }
    Ok(ChannelRealization { h })
}

/// Gauss-Markov CSI error: `sqrt(1 - tau^2) h + tau e` with fresh CN(0, 1)
/// noise `e`. Per-entry variance is preserved.
pub fn corrupt_csi(
    h: &ChannelRealization,
    tau: f64,
    rng: &mut RngStream,
) -> Result<ChannelRealization> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(invalid(format!("tau must lie in [0, 1], got {tau}")));
    }
    if tau == 0.0 {
        return Ok(h.clone());
    }
    let e = sample_complex_gaussian(h.h.rows(), h.h.cols(), rng)?;
    let keep = Complex64::new((1.0 - tau * tau).sqrt(), 0.0);
    let noisy = h.h.scale(keep).add_scaled(Complex64::new(tau, 0.0), &e)?;
    Ok(ChannelRealization { h: noisy })
}

/// Per-user link quality for a precoder.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkMetrics {
    pub sinr: Vec<f64>,
    /// Spectral efficiency `log2(1 + SINR)` per user, bits/s/Hz.
    pub se: Vec<f64>,
    pub total_se: f64,
    /// Worst user SE inside each group.
    pub group_min_se: Vec<f64>,
    pub min_se: f64,
}

/// `a[k][g] = h_k^H w_g` for every user and group.
pub fn effective_gains(h: &ChannelRealization, w: &PrecoderSet) -> Result<ComplexMatrix> {
    if h.h.cols() != w.w.rows() {
        return Err(invalid(format!(
            "channel has {} antennas but precoder has {} rows",
            h.h.cols(),
            w.w.rows()
        )));
    }
    // (H^T)^H W = conj(H) W
    h.h.transpose().adjoint_matmul(&w.w)
}

pub fn sinr_and_se(
    h: &ChannelRealization,
    w: &PrecoderSet,
    scenario: &Scenario,
) -> Result<LinkMetrics> {
    if h.num_users() != scenario.num_users {
        return Err(invalid("channel user count does not match scenario"));
    }
    check_precoder_shape(&w.w, scenario)?;
    let gains = effective_gains(h, w)?;
    let sigma2 = scenario.noise_power;
    let mut sinr = Vec::with_capacity(scenario.num_users);
    for (k, &g) in scenario.group_assignment.iter().enumerate() {
        let powers = gains.row(k).iter().map(|a| a.norm_sqr());
        let mut signal = 0.0;
        let mut interference = 0.0;
        for (gp, p) in powers.enumerate() {
            if gp == g {
                signal = p;
            } else {
                interference += p;
            }
        }
        sinr.push(signal / (interference + sigma2));
    }
    let se: Vec<f64> = sinr
        .iter()
        .map(|s| s.ln_1p() / std::f64::consts::LN_2)
        .collect();
    let total_se = se.iter().sum();
    let mut group_min_se = vec![f64::INFINITY; scenario.num_groups()];
    for (k, &g) in scenario.group_assignment.iter().enumerate() {
        group_min_se[g] = group_min_se[g].min(se[k]);
    }
    let min_se = se.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(LinkMetrics {
        sinr,
        se,
        total_se,
        group_min_se,
        min_se,
    })
}

/// Euclidean projection onto the per-station power balls: a station whose
/// power `s_b` exceeds `P` has all its rows scaled by `sqrt(P / s_b)`.
pub fn project_power(w: &PrecoderSet, scenario: &Scenario) -> PrecoderSet {
    let mut out = w.clone();
    project_power_in_place(&mut out, scenario);
    out
}

pub(crate) fn project_power_in_place(w: &mut PrecoderSet, scenario: &Scenario) {
    let budget = scenario.power_budget_per_station;
    let powers = w.station_powers(scenario);
    for (b, &s) in powers.iter().enumerate() {
        if s > budget {
            let f = Complex64::new((budget / s).sqrt(), 0.0);
            for r in scenario.station_rows(b) {
                for x in w.w.row_mut(r) {
                    *x *= f;
                }
            }
        }
    }
}
