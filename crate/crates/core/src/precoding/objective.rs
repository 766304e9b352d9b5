//! Softmin multicast objective and its gradient.
//!
//! With `a_kg = h_k^H w_g`, `S_k = sum_g |a_kg|^2 + s2` and
//! `I_k = S_k - |a_k,g(k)|^2`, user `k` has `SE_k = log2(S_k / I_k)` and the
//! objective is `f = -tau ln sum_k exp(-SE_k / tau)`.
//!
//! Using `d|a_kg|^2 / d conj(w_g) = a_kg h_k`, the Wirtinger derivative is
//!
//! ```text
//! df/d conj(w_g) = sum_k p_k / ln 2 * a_kg * (1/S_k - [g != g(k)] / I_k) * h_k
//! ```
//!
//! with softmax weights `p_k = exp(-SE_k / tau) / sum_j exp(-SE_j / tau)`.
//! The returned gradient is `2 df/d conj(w)`, i.e. `df/d Re w + i df/d Im w`,
//! the steepest-ascent direction in the real embedding.

use crate::cellfree::{effective_gains, sinr_and_se, ChannelRealization, PrecoderSet, Scenario};
use crate::error::{invalid, Result};
use crate::numkernel::ComplexMatrix;

/// `-tau ln sum exp(-v_k / tau)`, evaluated with the minimum factored out.
pub fn softmin(values: &[f64], tau: f64) -> f64 {
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    let s: f64 = values.iter().map(|&v| (-(v - m) / tau).exp()).sum();
    m - tau * s.ln()
}

fn check_tau(tau_soft: f64) -> Result<()> {
    if !(tau_soft > 0.0 && tau_soft.is_finite()) {
        return Err(invalid(format!(
            "tau_soft must be positive, got {tau_soft}"
        )));
    }
    Ok(())
}

pub fn smoothed_min_rate(
    h: &ChannelRealization,
    w: &PrecoderSet,
    scenario: &Scenario,
    tau_soft: f64,
) -> Result<f64> {
    check_tau(tau_soft)?;
    let metrics = sinr_and_se(h, w, scenario)?;
    Ok(softmin(&metrics.se, tau_soft))
}

pub fn smoothed_min_rate_gradient(
    h: &ChannelRealization,
    w: &PrecoderSet,
    scenario: &Scenario,
    tau_soft: f64,
) -> Result<ComplexMatrix> {
    smoothed_min_rate_with_gradient(h, w, scenario, tau_soft).map(|(_, g)| g)
}

/// Objective value and gradient from one pass over the effective gains.
pub fn smoothed_min_rate_with_gradient(
    h: &ChannelRealization,
    w: &PrecoderSet,
    scenario: &Scenario,
    tau_soft: f64,
) -> Result<(f64, ComplexMatrix)> {
    check_tau(tau_soft)?;
    if h.num_users() != scenario.num_users
        || w.w.shape() != (scenario.total_antennas(), scenario.num_groups())
    {
        return Err(invalid("channel or precoder shape does not match scenario"));
    }
    let gains = effective_gains(h, w)?;
    let k_users = scenario.num_users;
    let groups = scenario.num_groups();
    let sigma2 = scenario.noise_power;

    let mut total = vec![0.0; k_users];
    let mut interference = vec![0.0; k_users];
    let mut se = vec![0.0; k_users];
    for k in 0..k_users {
        let own = scenario.group_assignment[k];
        let mut s = sigma2;
        let mut i = sigma2;
        for (g, a) in gains.row(k).iter().enumerate() {
            let p = a.norm_sqr();
            s += p;
            if g != own {
                i += p;
            }
        }
        total[k] = s;
        interference[k] = i;
        se[k] = (s / i).ln() / std::f64::consts::LN_2;
    }
    let value = softmin(&se, tau_soft);

    let m = se.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = se.iter().map(|&v| (-(v - m) / tau_soft).exp()).collect();
    let z: f64 = weights.iter().sum();

    // coefficient matrix M (K x G); gradient = H^T M
    let mut coef = ComplexMatrix::zeros(k_users, groups);
    for k in 0..k_users {
        let p = weights[k] / z;
        let scale = 2.0 * p / std::f64::consts::LN_2;
        let own = scenario.group_assignment[k];
        for g in 0..groups {
            let mut factor = 1.0 / total[k];
            if g != own {
                factor -= 1.0 / interference[k];
            }
            coef[(k, g)] = gains[(k, g)] * (scale * factor);
        }
    }
    let grad = h.h.transpose().matmul(&coef)?;
    Ok((value, grad))
}
