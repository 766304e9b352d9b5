//! ReduNet: each layer's operators are computed in closed form from the
//! current features, then applied as one gradient-ascent step on `Delta R`.

use super::coding::{coding_rate, conditional_coding_rate, FeatureBatch};
use crate::error::{invalid, Result};
use crate::numkernel::{inverse_hpd, symmetric_eigen, RealMatrix, RngStream};

/// Default soft-assignment sharpness of [`redunet_forward`].
pub const DEFAULT_ASSIGNMENT_SHARPNESS: f64 = 1.0;

/// Sharpness used by the mixture demo. At `alpha_j = d/(m_j eps^2)` the
/// norms `||C_j z||` are of order `0.1`, so a sharpness of one leaves the
/// assignment almost uniform and the update stops separating the classes.
pub const DEMO_ASSIGNMENT_SHARPNESS: f64 = 500.0;

/// Operators of one ReduNet layer.
///
/// `e = alpha (I + alpha Z Z^T)^{-1}` expands the whole batch and
/// `c_list[j] = alpha_j (I + alpha_j Z_j Z_j^T)^{-1}` compresses class `j`,
/// with `alpha = d/(m eps^2)` and `alpha_j = d/(m_j eps^2)`. Empty classes get
/// a zero operator and zero weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ReduLayerParams {
    pub e: RealMatrix,
    pub c_list: Vec<RealMatrix>,
    /// `m_j / m`.
    pub gamma: Vec<f64>,
}

fn scaled_regularized_inverse(z: &RealMatrix, alpha: f64) -> Result<RealMatrix> {
    let mut m = z.matmul(&z.transpose())?.scale(alpha);
    for i in 0..m.rows() {
        m[(i, i)] += 1.0;
    }
    m.symmetrize();
    Ok(inverse_hpd(&m)?.scale(alpha))
}

pub fn redunet_layer(batch: &FeatureBatch) -> Result<ReduLayerParams> {
    let d = batch.dim();
    let m = batch.len() as f64;
    let alpha = d as f64 / (m * batch.epsilon_sq);
    let e = scaled_regularized_inverse(&batch.z, alpha)?;
    let sizes = batch.class_sizes();
    let mut c_list = Vec::with_capacity(batch.num_classes);
    let mut gamma = Vec::with_capacity(batch.num_classes);
    for (j, &mj) in sizes.iter().enumerate() {
        if mj == 0 {
            c_list.push(RealMatrix::zeros(d, d));
            gamma.push(0.0);
            continue;
        }
        let alpha_j = d as f64 / (mj as f64 * batch.epsilon_sq);
        c_list.push(scaled_regularized_inverse(
            &batch.class_columns(j),
            alpha_j,
        )?);
        gamma.push(mj as f64 / m);
    }
    Ok(ReduLayerParams { e, c_list, gamma })
}

/// Scales every column to unit Euclidean norm; zero columns stay zero.
pub fn normalize_columns(z: &RealMatrix) -> RealMatrix {
    let mut out = z.clone();
    for j in 0..z.cols() {
        let n = (0..z.rows())
            .map(|i| z[(i, j)] * z[(i, j)])
            .sum::<f64>()
            .sqrt();
        if n > 0.0 {
            for i in 0..z.rows() {
                out[(i, j)] = z[(i, j)] / n;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerRates {
    pub r: f64,
    pub r_c: f64,
    pub delta_r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReduNetRun {
    pub output: FeatureBatch,
    /// Rates of the normalized input.
    pub input_rates: LayerRates,
    /// Rates after each layer, computed with the true memberships.
    pub layer_rates: Vec<LayerRates>,
    /// Intermediate features after each layer.
    pub layer_features: Vec<RealMatrix>,
    pub layer_params: Vec<ReduLayerParams>,
}

impl ReduNetRun {
    pub fn delta_r_trace(&self) -> Vec<f64> {
        self.layer_rates.iter().map(|r| r.delta_r).collect()
    }
}

fn rates(batch: &FeatureBatch) -> Result<LayerRates> {
    let r = coding_rate(batch)?;
    let r_c = conditional_coding_rate(batch)?;
    Ok(LayerRates {
        r,
        r_c,
        delta_r: r - r_c,
    })
}

/// Runs `layers` ReduNet layers on the column-normalized input. Each column
/// is updated as
///
/// ```text
/// z <- normalize(z + eta (E z - sum_j gamma_j pi_j(z) C_j z))
/// pi_j(z) = softmax_j(-sharpness * ||C_j z||)
/// ```
///
/// with the operators rebuilt from the current features at every layer.
pub fn redunet_forward(
    batch: &FeatureBatch,
    layers: usize,
    eta: f64,
    assignment_sharpness: f64,
) -> Result<ReduNetRun> {
    if eta.is_nan() || eta <= 0.0 {
        return Err(invalid("eta must be positive"));
    }
    if !(assignment_sharpness >= 0.0 && assignment_sharpness.is_finite()) {
        return Err(invalid(
            "assignment sharpness must be finite and nonnegative",
        ));
    }
    let mut current = batch.with_features(normalize_columns(&batch.z))?;
    let input_rates = rates(&current)?;
    let mut layer_rates = Vec::with_capacity(layers);
    let mut layer_features = Vec::with_capacity(layers);
    let mut layer_params = Vec::with_capacity(layers);
    let d = batch.dim();
    for _ in 0..layers {
        let params = redunet_layer(&current)?;
        let active: Vec<usize> = (0..params.gamma.len())
            .filter(|&j| params.gamma[j] > 0.0)
            .collect();
        let mut next = current.z.clone();
        for col in 0..current.len() {
            let z = current.z.column(col);
            let ez = params.e.mul_vec(&z)?;
            let cz: Vec<Vec<f64>> = active
                .iter()
                .map(|&j| params.c_list[j].mul_vec(&z))
                .collect::<Result<_>>()?;
            let scores: Vec<f64> = cz
                .iter()
                .map(|v| -assignment_sharpness * v.iter().map(|x| x * x).sum::<f64>().sqrt())
                .collect();
            let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
            let total: f64 = weights.iter().sum();
            for i in 0..d {
                let compress: f64 = active
                    .iter()
                    .zip(&cz)
                    .zip(&weights)
                    .map(|((&j, v), w)| params.gamma[j] * (w / total) * v[i])
                    .sum();
                next[(i, col)] = z[i] + eta * (ez[i] - compress);
            }
        }
        current = current.with_features(normalize_columns(&next))?;
        layer_rates.push(rates(&current)?);
        layer_features.push(current.z.clone());
        layer_params.push(params);
    }
    Ok(ReduNetRun {
        output: current,
        input_rates,
        layer_rates,
        layer_features,
        layer_params,
    })
}

/// Fraction of samples whose own class subspace (top `subspace_dim`
/// principal directions of that class, uncentered) is the nearest.
pub fn nearest_subspace_accuracy(batch: &FeatureBatch, subspace_dim: usize) -> Result<f64> {
    let d = batch.dim();
    if subspace_dim == 0 || subspace_dim > d {
        return Err(invalid(format!("subspace_dim must be in 1..={d}")));
    }
    let sizes = batch.class_sizes();
    let mut bases: Vec<Option<RealMatrix>> = Vec::with_capacity(batch.num_classes);
    for (j, &mj) in sizes.iter().enumerate() {
        if mj == 0 {
            bases.push(None);
            continue;
        }
        let zj = batch.class_columns(j);
        let mut gram = zj.matmul(&zj.transpose())?;
        gram.symmetrize();
        let (_, vecs) = symmetric_eigen(&gram)?;
        // eigenvalues ascend: keep the last subspace_dim columns
        bases.push(Some(RealMatrix::from_fn(d, subspace_dim, |r, c| {
            vecs[(r, d - subspace_dim + c)]
        })));
    }
    let mut correct = 0usize;
    for col in 0..batch.len() {
        let z = batch.z.column(col);
        let mut best = (f64::INFINITY, usize::MAX);
        for (j, basis) in bases.iter().enumerate() {
            let Some(u) = basis else { continue };
            let coeffs = u.transpose().mul_vec(&z)?;
            let proj = u.mul_vec(&coeffs)?;
            let resid: f64 = z.iter().zip(&proj).map(|(a, b)| (a - b) * (a - b)).sum();
            if resid < best.0 {
                best = (resid, j);
            }
        }
        if best.1 == batch.memberships[col] {
            correct += 1;
        }
    }
    Ok(correct as f64 / batch.len() as f64)
}

/// Two isotropic Gaussian classes in `dim` dimensions. The class means lie on
/// the first two coordinate axes at distance `separation` from each other,
/// so the classes occupy distinct directions after normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureSpec {
    pub dim: usize,
    pub per_class: usize,
    pub separation: f64,
    pub noise_std: f64,
    pub epsilon_sq: f64,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        Self {
            dim: 8,
            per_class: 100,
            separation: 4.0,
            noise_std: 1.0,
            epsilon_sq: 0.5,
        }
    }
}

/// Samples are drawn class by class; labels are `0` then `1`.
pub fn two_class_mixture(spec: &MixtureSpec, rng: &mut RngStream) -> Result<FeatureBatch> {
    if spec.dim < 2 || spec.per_class == 0 {
        return Err(invalid("mixture needs dim >= 2 and per_class >= 1"));
    }
    let m = 2 * spec.per_class;
    let mut z = RealMatrix::zeros(spec.dim, m);
    let mut labels = Vec::with_capacity(m);
    let offset = spec.separation / std::f64::consts::SQRT_2;
    for col in 0..m {
        let class = col / spec.per_class;
        for i in 0..spec.dim {
            let mean = if i == class { offset } else { 0.0 };
            z[(i, col)] = mean + spec.noise_std * rng.standard_normal();
        }
        labels.push(class);
    }
    FeatureBatch::new(z, labels, 2, spec.epsilon_sq)
}
