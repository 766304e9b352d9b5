//! One function per experiment kind: run the core algorithms and build the
//! CSV table plus manifest details.

use rayon::prelude::*;
use serde_json::json;
use wbopt_core::beliefprop::sum_product;
use wbopt_core::cellfree::{draw_channel, sinr_and_se, Scenario};
use wbopt_core::horizonopt::{best_constant_schedule, chebyshev_schedule, worst_case_factor};
use wbopt_core::infobottleneck::{ib_sweep, mutual_information, DiscreteJoint, IbSweepConfig};
use wbopt_core::numkernel::spectral_norm;
use wbopt_core::precoding::{
    compare_schedules, mrt, train_unfolded, wmmse_sum_se, NelderMeadConfig, TrainConfig,
    UnfoldedSchedule,
};
use wbopt_core::ratereduction::{
    ista_step, lasso_objective, mssa_attention, mssa_forward, nearest_subspace_accuracy,
    normalize_columns, random_orthonormal_basis, redunet_forward, two_class_mixture,
    unit_norm_dictionary, DictionaryBlock, MixtureSpec,
};
use wbopt_core::{RealMatrix, RngStream};

use crate::config::{
    BpParams, Case1Params, Case2Params, CrateBlockParams, HorizonParams, IbParams, RedunetParams,
};
use crate::report::Table;

pub type Output = (Table, serde_json::Value);
type CoreResult<T> = wbopt_core::Result<T>;

pub const CASE1_HEADER: [&str; 6] = [
    "seed",
    "noise_power",
    "scheme",
    "mean_sum_se",
    "std_sum_se",
    "num_channels",
];
pub const CASE2_HEADER: [&str; 8] = [
    "seed",
    "tau_csi",
    "scheme",
    "layers",
    "mean_min_se",
    "std_min_se",
    "mean_total_se",
    "num_channels",
];
pub const REDUNET_HEADER: [&str; 5] = [
    "layer_index",
    "R",
    "R_c",
    "delta_R",
    "nearest_subspace_accuracy",
];
pub const CRATE_HEADER: [&str; 3] = ["iteration", "lasso_objective", "nonzero_fraction"];
pub const IB_HEADER: [&str; 6] = [
    "beta",
    "I_xz",
    "I_zy",
    "objective",
    "iterations",
    "converged",
];
pub const HORIZON_HEADER: [&str; 3] = ["t", "schedule_kind", "worst_case_factor"];
pub const BP_HEADER: [&str; 3] = ["variable", "state", "marginal"];

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Sum-SE of MRT and WMMSE at each noise level. Channel `i` is drawn from
/// substream `i` and reused for every noise level.
pub fn case1_sweep(seed: u64, p: &Case1Params) -> CoreResult<Output> {
    p.scenario.validate()?;
    let rng = RngStream::new(seed, 0);
    let mut table = Table::new(&CASE1_HEADER);
    let mut iterations = Vec::new();
    for &noise in &p.noise_powers {
        let s = Scenario {
            noise_power: noise,
            ..p.scenario.clone()
        };
        s.validate()?;
        let per_channel: Vec<(f64, f64, usize)> = (0..p.num_channels)
            .into_par_iter()
            .map(|i| {
                let h = draw_channel(&s, &mut rng.substream(i as u64))?;
                let m = sinr_and_se(&h, &mrt(&h, &s)?, &s)?.total_se;
                let (w, trace) = wmmse_sum_se(&h, &s, p.wmmse_max_iters, p.wmmse_tol)?;
                Ok((m, sinr_and_se(&h, &w, &s)?.total_se, trace.iterations()))
            })
            .collect::<CoreResult<_>>()?;
        for (scheme, pick) in [("mrt", 0), ("wmmse", 1)] {
            let values: Vec<f64> = per_channel
                .iter()
                .map(|v| if pick == 0 { v.0 } else { v.1 })
                .collect();
            let (mean, std) = mean_std(&values);
            table.push(vec![
                seed.into(),
                noise.into(),
                scheme.into(),
                mean.into(),
                std.into(),
                p.num_channels.into(),
            ]);
        }
        let mean_iters =
            per_channel.iter().map(|v| v.2 as f64).sum::<f64>() / p.num_channels.max(1) as f64;
        iterations.push(json!({"noise_power": noise, "mean_wmmse_iterations": mean_iters}));
    }
    Ok((table, json!({ "wmmse": iterations })))
}

/// Trains the unfolded schedule on stream `(seed, 0)` and compares it with
/// the best grid constant and the default constant on stream `(seed, 1)`.
pub fn case2_unfold(seed: u64, p: &Case2Params) -> CoreResult<Output> {
    let cfg = TrainConfig {
        tau_soft: p.tau_soft,
        nelder_mead: NelderMeadConfig {
            max_evals: p.max_evals,
            ..NelderMeadConfig::default()
        },
        ..TrainConfig::default()
    };
    let report = train_unfolded(
        &p.scenario,
        p.layers,
        p.train_channels,
        &RngStream::new(seed, 0),
        &cfg,
    )?;
    let best_constant = report.best_constant().expect("grid is non-empty").clone();
    let schedules = vec![
        ("unfolded".to_string(), report.schedule.clone()),
        (
            "best_constant".to_string(),
            UnfoldedSchedule::constant(best_constant.steps[0], p.layers, p.tau_soft)?,
        ),
        (
            "default_constant".to_string(),
            UnfoldedSchedule::constant(p.default_step, p.layers, p.tau_soft)?,
        ),
    ];
    let rows = compare_schedules(
        &p.scenario,
        &schedules,
        p.test_channels,
        &p.tau_csi,
        &RngStream::new(seed, 1),
    )?;
    let mut table = Table::new(&CASE2_HEADER);
    let mut smoothed = Vec::new();
    for r in &rows {
        table.push(vec![
            seed.into(),
            r.tau_csi.into(),
            r.scheme.as_str().into(),
            r.layers.into(),
            r.mean_min_se.into(),
            r.std_min_se.into(),
            r.mean_total_se.into(),
            r.num_channels.into(),
        ]);
        smoothed.push(json!({"tau_csi": r.tau_csi, "scheme": r.scheme, "mean_smoothed_min_se": r.mean_smoothed}));
    }
    let details = json!({
        "trained_steps": report.schedule.layer_steps,
        "training_objective": report.schedule.training.as_ref().map(|t| t.objective),
        "training_evaluations": report.candidates.len(),
        "best_constant_step": best_constant.steps[0],
        "best_constant_training_objective": best_constant.objective,
        "held_out_smoothed": smoothed,
    });
    Ok((table, details))
}

/// Row 0 describes the normalized input; row `i` the output of layer `i`.
pub fn redunet_demo(seed: u64, p: &RedunetParams) -> CoreResult<Output> {
    let spec = MixtureSpec {
        dim: p.dim,
        per_class: p.per_class,
        separation: p.separation,
        noise_std: p.noise_std,
        epsilon_sq: p.epsilon_sq,
    };
    let batch = two_class_mixture(&spec, &mut RngStream::new(seed, 0))?;
    let run = redunet_forward(&batch, p.layers, p.eta, p.assignment_sharpness)?;
    let input = batch.with_features(normalize_columns(&batch.z))?;
    let mut table = Table::new(&REDUNET_HEADER);
    let accuracy_in = nearest_subspace_accuracy(&input, p.subspace_dim)?;
    let r = &run.input_rates;
    table.push(vec![
        0usize.into(),
        r.r.into(),
        r.r_c.into(),
        r.delta_r.into(),
        accuracy_in.into(),
    ]);
    for (i, (rates, z)) in run.layer_rates.iter().zip(&run.layer_features).enumerate() {
        let acc = nearest_subspace_accuracy(&batch.with_features(z.clone())?, p.subspace_dim)?;
        table.push(vec![
            (i + 1).into(),
            rates.r.into(),
            rates.r_c.into(),
            rates.delta_r.into(),
            acc.into(),
        ]);
    }
    let trace = run.delta_r_trace();
    let strictly_increasing = std::iter::once(r.delta_r)
        .chain(trace.iter().copied())
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[1] > w[0]);
    Ok((
        table,
        json!({ "delta_r_strictly_increasing": strictly_increasing }),
    ))
}

/// One MSSA pass on random tokens followed by ISTA iterations that sparse-code
/// the result. Row 0 is the all-zero code.
pub fn crate_block(seed: u64, p: &CrateBlockParams) -> CoreResult<Output> {
    let mut rng = RngStream::new(seed, 0);
    let heads = (0..p.heads)
        .map(|_| random_orthonormal_basis(p.dim, p.head_dim, &mut rng))
        .collect::<CoreResult<Vec<_>>>()?;
    let dictionary = unit_norm_dictionary(p.dim, p.atoms, &mut rng)?;
    let sigma = spectral_norm(&dictionary)?;
    let ista_step_size = p.ista_step_fraction / (sigma * sigma);
    let tokens = RealMatrix::from_fn(p.dim, p.tokens, |_, _| rng.standard_normal());

    let attention = DictionaryBlock::new(
        heads.clone(),
        dictionary.clone(),
        p.mssa_step,
        p.sparsity_weight,
    )?;
    let mixed = mssa_forward(&tokens, &attention)?;
    let mut colsum_error = 0.0f64;
    for u in &heads {
        let a = mssa_attention(&tokens, u)?;
        for j in 0..a.cols() {
            colsum_error = colsum_error.max((a.column(j).iter().sum::<f64>() - 1.0).abs());
        }
    }

    let sparsify = DictionaryBlock {
        step: ista_step_size,
        ..attention
    };
    let mut codes = RealMatrix::zeros(p.atoms, p.tokens);
    let mut table = Table::new(&CRATE_HEADER);
    let nonzero = |c: &RealMatrix| {
        c.as_slice().iter().filter(|&&x| x != 0.0).count() as f64 / c.as_slice().len() as f64
    };
    let objective = lasso_objective(&codes, &mixed, &dictionary, p.sparsity_weight)?;
    table.push(vec![
        0usize.into(),
        objective.into(),
        nonzero(&codes).into(),
    ]);
    let mut monotone = true;
    let mut prev = objective;
    for it in 1..=p.ista_iters {
        codes = ista_step(&codes, &mixed, &sparsify)?;
        let objective = lasso_objective(&codes, &mixed, &dictionary, p.sparsity_weight)?;
        monotone &= objective <= prev + 1e-12;
        prev = objective;
        table.push(vec![it.into(), objective.into(), nonzero(&codes).into()]);
    }
    let details = json!({
        "mssa_change_fro": mixed.add_scaled(-1.0, &tokens)?.frobenius_norm(),
        "max_attention_colsum_error": colsum_error,
        "ista_step": ista_step_size,
        "lasso_non_increasing": monotone,
    });
    Ok((table, details))
}

pub fn ib_sweep_run(seed: u64, p: &IbParams) -> CoreResult<Output> {
    let joint = DiscreteJoint::from_rows(&p.joint)?;
    let cfg = IbSweepConfig {
        z_card: p.z_card,
        restarts: p.restarts,
        max_iters: p.max_iters,
        tol: p.tol,
        warm_start: p.warm_start,
    };
    let points = ib_sweep(&joint, &p.betas, &cfg, &RngStream::new(seed, 0))?;
    let mut table = Table::new(&IB_HEADER);
    for pt in &points {
        table.push(vec![
            pt.beta.into(),
            pt.i_xz.into(),
            pt.i_zy.into(),
            pt.objective.into(),
            pt.iterations.into(),
            pt.converged.into(),
        ]);
    }
    Ok((table, json!({ "I_xy": mutual_information(&joint) })))
}

pub fn horizon_sweep(p: &HorizonParams) -> CoreResult<Output> {
    let mut table = Table::new(&HORIZON_HEADER);
    for t in 1..=p.max_t {
        for (kind, s) in [
            ("chebyshev", chebyshev_schedule(t, p.mu, p.l)?),
            ("best_constant", best_constant_schedule(t, p.mu, p.l)?),
        ] {
            table.push(vec![t.into(), kind.into(), worst_case_factor(&s).into()]);
        }
    }
    Ok((table, json!({})))
}

pub fn bp_run(p: &BpParams) -> CoreResult<Output> {
    let r = sum_product(&p.graph, p.max_iters, p.damping, p.tol)?;
    let mut table = Table::new(&BP_HEADER);
    for (v, m) in r.marginals.iter().enumerate() {
        for (state, &prob) in m.iter().enumerate() {
            table.push(vec![v.into(), state.into(), prob.into()]);
        }
    }
    Ok((
        table,
        json!({"converged": r.converged, "iterations": r.iterations}),
    ))
}
