use num_complex::Complex64;

use super::OptimizerTrace;
use crate::cellfree::{effective_gains, sinr_and_se, ChannelRealization, PrecoderSet, Scenario};
use crate::error::{invalid, Result};
use crate::numkernel::{norm_sq, solve, ComplexMatrix};

/// Normalizes every column to unit norm (zero columns stay zero), then
/// scales all columns by one common factor so the most loaded station uses
/// exactly its budget. Column directions are preserved.
pub fn equal_power_columns(directions: &ComplexMatrix, scenario: &Scenario) -> Result<PrecoderSet> {
    let mut w = directions.clone();
    for g in 0..w.cols() {
        let col = w.column(g);
        let n = norm_sq(&col).sqrt();
        if n > 0.0 {
            let scaled: Vec<Complex64> = col.iter().map(|x| x / n).collect();
            w.set_column(g, &scaled);
        }
    }
    let mut set = PrecoderSet::new(w, scenario)?;
    let peak = set.station_powers(scenario).into_iter().fold(0.0, f64::max);
    if peak > 0.0 {
        let f = Complex64::new((scenario.power_budget_per_station / peak).sqrt(), 0.0);
        set.w = set.w.scale(f);
    }
    // guard the last ulp
    crate::cellfree::project_power_in_place(&mut set, scenario);
    Ok(set)
}

/// Maximum-ratio transmission: `w_{g(k)} = h_k`, equal column power, scaled
/// so the most loaded station transmits at its budget.
pub fn mrt(h: &ChannelRealization, scenario: &Scenario) -> Result<PrecoderSet> {
    scenario.validate()?;
    if !scenario.is_unicast() {
        return Err(invalid(
            "MRT requires unicast grouping (one user per group)",
        ));
    }
    ChannelRealization::new(h.h.clone(), scenario)?;
    let mut dirs = ComplexMatrix::zeros(scenario.total_antennas(), scenario.num_groups());
    for (k, &g) in scenario.group_assignment.iter().enumerate() {
        dirs.set_column(g, h.user(k));
    }
    equal_power_columns(&dirs, scenario)
}

/// Default initial point for multicast PGD: each group's column is the
/// average of its members' channels, then [`equal_power_columns`].
pub fn matched_filter_init(h: &ChannelRealization, scenario: &Scenario) -> Result<PrecoderSet> {
    ChannelRealization::new(h.h.clone(), scenario)?;
    let mut dirs = ComplexMatrix::zeros(scenario.total_antennas(), scenario.num_groups());
    for (g, members) in scenario.groups().iter().enumerate() {
        let inv = 1.0 / members.len() as f64;
        for n in 0..scenario.total_antennas() {
            let s: Complex64 = members.iter().map(|&k| h.h[(k, n)]).sum();
            dirs[(n, g)] = s * inv;
        }
    }
    equal_power_columns(&dirs, scenario)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WmmseConfig {
    pub max_iters: usize,
    /// Stop when the relative change of sum-SE falls below this.
    pub tol: f64,
    /// Relative bracket width at which the power multiplier bisection stops.
    pub bisection_tol: f64,
}

impl Default for WmmseConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-8,
            bisection_tol: 1e-10,
        }
    }
}

/// WMMSE for unicast sum-SE under the sum-power budget
/// `num_stations * power_budget_per_station`, started from MRT directions
/// with equal power per user at full sum power.
pub fn wmmse_sum_se(
    h: &ChannelRealization,
    scenario: &Scenario,
    max_iters: usize,
    tol: f64,
) -> Result<(PrecoderSet, OptimizerTrace)> {
    scenario.validate()?;
    if !scenario.is_unicast() {
        return Err(invalid(
            "WMMSE requires unicast grouping (one user per group)",
        ));
    }
    ChannelRealization::new(h.h.clone(), scenario)?;
    let total = scenario.num_stations as f64 * scenario.power_budget_per_station;
    let k = scenario.num_users;
    let mut w = ComplexMatrix::zeros(scenario.total_antennas(), k);
    for (user, &g) in scenario.group_assignment.iter().enumerate() {
        let hk = h.user(user);
        let n = norm_sq(hk).sqrt();
        if n > 0.0 {
            let amp = (total / k as f64).sqrt() / n;
            let col: Vec<Complex64> = hk.iter().map(|x| x * amp).collect();
            w.set_column(g, &col);
        }
    }
    let cfg = WmmseConfig {
        max_iters,
        tol,
        ..WmmseConfig::default()
    };
    wmmse_from(h, scenario, PrecoderSet::new(w, scenario)?, &cfg)
}

/// WMMSE iterations from an arbitrary starting precoder whose total power
/// does not exceed the sum-power budget.
///
/// One iteration, for every user `k` with `T_k = sum_j |h_k^H w_j|^2 + s2`:
///
/// ```text
/// u_k = h_k^H w_k / T_k
/// omega_k = 1 / (1 - |h_k^H w_k|^2 / T_k)       (= 1 + SINR_k)
/// w_k = omega_k u_k (sum_j omega_j |u_j|^2 h_j h_j^H + lambda I)^{-1} h_k
/// ```
///
/// The inverse is applied in the user space: with `G = [h_1 .. h_K]`,
/// `Q = G^H G` and `D = diag(omega_j |u_j|^2)`,
/// `W = G (D Q + lambda I)^{-1} diag(omega_k u_k)`. The multiplier `lambda >= 0`
/// is zero when that meets the budget, else found by bisection on the
/// monotone total power, keeping the feasible bracket end.
pub fn wmmse_from(
    h: &ChannelRealization,
    scenario: &Scenario,
    w0: PrecoderSet,
    cfg: &WmmseConfig,
) -> Result<(PrecoderSet, OptimizerTrace)> {
    let total_budget = scenario.num_stations as f64 * scenario.power_budget_per_station;
    if w0.total_power() > total_budget * (1.0 + 1e-12) + 1e-12 {
        return Err(invalid("initial precoder exceeds the sum-power budget"));
    }
    let k = scenario.num_users;
    let sigma2 = scenario.noise_power;
    // user index of each group column
    let mut user_of = vec![0; k];
    for (user, &g) in scenario.group_assignment.iter().enumerate() {
        user_of[g] = user;
    }
    let g_mat = h.h.transpose();
    let gram = g_mat.adjoint_matmul(&g_mat)?;

    let mut w = w0;
    let mut trace = OptimizerTrace {
        initial_objective: sinr_and_se(h, &w, scenario)?.total_se,
        ..OptimizerTrace::default()
    };
    let mut prev = trace.initial_objective;
    for _ in 0..cfg.max_iters {
        let gains = effective_gains(h, &w)?;
        let mut d = vec![0.0; k];
        let mut c = vec![Complex64::new(0.0, 0.0); k];
        for user in 0..k {
            let g = scenario.group_assignment[user];
            let t: f64 = gains.row(user).iter().map(|a| a.norm_sqr()).sum::<f64>() + sigma2;
            let a = gains[(user, g)];
            let u = a / t;
            let mse = 1.0 - a.norm_sqr() / t;
            let omega = 1.0 / mse;
            d[user] = omega * u.norm_sqr();
            c[user] = u * omega;
        }
        let mixing = |lambda: f64| -> Result<ComplexMatrix> {
            let mut m = ComplexMatrix::from_fn(k, k, |i, j| gram[(i, j)] * d[i]);
            for i in 0..k {
                m[(i, i)] += Complex64::new(lambda, 0.0);
            }
            let rhs = ComplexMatrix::from_diag(&c);
            solve(&m, &rhs)
        };
        let power_of = |x: &ComplexMatrix| -> Result<f64> {
            Ok(x.adjoint_matmul(&gram.matmul(x)?)?.trace().re)
        };
        let x = match mixing(0.0) {
            Ok(x0) if power_of(&x0)? <= total_budget => x0,
            _ => {
                let mut lo = 0.0;
                let mut hi =
                    d.iter().copied().fold(0.0, f64::max).max(1e-12) * gram.trace().re.max(1e-12);
                let mut x_hi = mixing(hi)?;
                while power_of(&x_hi)? > total_budget {
                    lo = hi;
                    hi *= 2.0;
                    x_hi = mixing(hi)?;
                }
                for _ in 0..200 {
                    if hi - lo <= cfg.bisection_tol * hi {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    let x_mid = mixing(mid)?;
                    if power_of(&x_mid)? > total_budget {
                        lo = mid;
                    } else {
                        hi = mid;
                        x_hi = x_mid;
                    }
                }
                x_hi
            }
        };
        // W = G X, columns indexed by user; reorder into group columns
        let w_users = g_mat.matmul(&x)?;
        let mut next = ComplexMatrix::zeros(scenario.total_antennas(), k);
        for (g, &u) in user_of.iter().enumerate() {
            next.set_column(g, &w_users.column(u));
        }
        w = PrecoderSet::new(next, scenario)?;
        let obj = sinr_and_se(h, &w, scenario)?.total_se;
        trace.push(obj, w.total_power());
        let done = (obj - prev).abs() <= cfg.tol * prev.abs().max(f64::MIN_POSITIVE);
        prev = obj;
        if done {
            break;
        }
    }
    Ok((w, trace))
}
