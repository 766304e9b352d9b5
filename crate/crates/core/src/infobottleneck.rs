//! Iterative information-bottleneck solver on finite alphabets.
//!
//! Minimizes `L = I(X;Z) - beta I(Z;Y)` over encoders `q(z|x)` with the
//! self-consistent updates
//!
//! ```text
//! q(z)   = sum_x p(x) q(z|x)
//! q(y|z) = sum_x p(x,y) q(z|x) / q(z)
//! q(z|x) <- q(z) exp(-beta KL(p(y|x) || q(y|z))) / normalizer
//! ```
//!
//! Each update is an exact block minimization of an upper bound on `L` that
//! is tight at the consistent marginals, so `L` never increases.

use rayon::prelude::*;

use crate::error::{domain, invalid, Result};
use crate::numkernel::{RealMatrix, RngStream};

const SIMPLEX_TOL: f64 = 1e-12;
/// Floor applied to `q(y|z)` before taking its logarithm.
pub const LOG_FLOOR: f64 = 1e-300;
/// Half-width of the relative perturbation of the uniform initial encoder.
pub const INIT_PERTURBATION: f64 = 1e-2;
pub const DEFAULT_RESTARTS: usize = 10;

/// Joint distribution `p(x, y)` stored as an `|X| x |Y|` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    p: RealMatrix,
}

impl DiscreteJoint {
    pub fn new(p: RealMatrix) -> Result<Self> {
        if p.as_slice().iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(domain("joint probabilities must be finite and nonnegative"));
        }
        let total: f64 = p.as_slice().iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(domain(format!(
                "joint probabilities sum to {total}, expected 1"
            )));
        }
        if let Some(x) = (0..p.rows()).find(|&x| p.row(x).iter().all(|&v| v == 0.0)) {
            return Err(domain(format!(
                "symbol x = {x} has zero marginal probability"
            )));
        }
        Ok(Self { p })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(RealMatrix::from_rows(rows)?)
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.p
    }

    pub fn x_card(&self) -> usize {
        self.p.rows()
    }

    pub fn y_card(&self) -> usize {
        self.p.cols()
    }

    pub fn px(&self) -> Vec<f64> {
        (0..self.p.rows())
            .map(|x| self.p.row(x).iter().sum())
            .collect()
    }
}

/// Encoder `q(z|x)` stored as an `|X| x |Z|` row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct IBEncoder {
    q: RealMatrix,
}

impl IBEncoder {
    pub fn new(q: RealMatrix) -> Result<Self> {
        if q.cols() == 0 {
            return Err(invalid("encoder needs at least one representation symbol"));
        }
        if q.as_slice().iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(invalid("encoder entries must be finite and nonnegative"));
        }
        for x in 0..q.rows() {
            let s: f64 = q.row(x).iter().sum();
            if (s - 1.0).abs() > SIMPLEX_TOL {
                return Err(invalid(format!("encoder row {x} sums to {s}")));
            }
        }
        Ok(Self { q })
    }

    /// Uniform rows with each entry scaled by `1 + scale * u`, `u ~ U[-1, 1)`,
    /// then renormalized.
    pub fn perturbed_uniform(
        x_card: usize,
        z_card: usize,
        scale: f64,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if z_card == 0 || x_card == 0 {
            return Err(invalid("encoder needs nonzero alphabets"));
        }
        if !(0.0..1.0).contains(&scale) {
            return Err(invalid("perturbation scale must lie in [0, 1)"));
        }
        let mut q = RealMatrix::from_fn(x_card, z_card, |_, _| 0.0);
        for x in 0..x_card {
            for z in 0..z_card {
                q[(x, z)] = 1.0 + scale * (2.0 * rng.uniform() - 1.0);
            }
        }
        normalize_rows(&mut q);
        Self::new(q)
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.q
    }

    pub fn z_card(&self) -> usize {
        self.q.cols()
    }
}

fn normalize_rows(q: &mut RealMatrix) {
    for x in 0..q.rows() {
        let s: f64 = q.row(x).iter().sum();
        for v in q.row_mut(x) {
            *v /= s;
        }
    }
}

/// Mutual information in bits of an arbitrary nonnegative joint table;
/// zero rows and columns are allowed.
fn mi_table(p: &RealMatrix) -> f64 {
    let pr: Vec<f64> = (0..p.rows()).map(|i| p.row(i).iter().sum()).collect();
    let pc: Vec<f64> = (0..p.cols())
        .map(|j| (0..p.rows()).map(|i| p[(i, j)]).sum())
        .collect();
    let mut total = 0.0;
    for i in 0..p.rows() {
        for j in 0..p.cols() {
            let v = p[(i, j)];
            if v > 0.0 {
                total += v * (v / (pr[i] * pc[j])).log2();
            }
        }
    }
    total.max(0.0)
}

/// `I(X;Y)` in bits with `0 log 0 = 0`.
pub fn mutual_information(p: &DiscreteJoint) -> f64 {
    mi_table(&p.p)
}

/// `(I(X;Z), I(Z;Y))` of an encoder.
pub fn information_pair(p: &DiscreteJoint, enc: &IBEncoder) -> Result<(f64, f64)> {
    if enc.q.rows() != p.x_card() {
        return Err(invalid(format!(
            "encoder has {} rows, joint has |X| = {}",
            enc.q.rows(),
            p.x_card()
        )));
    }
    let px = p.px();
    let pxz = RealMatrix::from_fn(p.x_card(), enc.z_card(), |x, z| px[x] * enc.q[(x, z)]);
    let pzy = enc.q.transpose().matmul(&p.p)?;
    Ok((mi_table(&pxz), mi_table(&pzy)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IBSolution {
    pub encoder: IBEncoder,
    pub i_xz: f64,
    pub i_zy: f64,
    /// `I(X;Z) - beta I(Z;Y)` of the initial encoder followed by one entry
    /// per iteration.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest entry change of the final update.
    pub residual: f64,
}

impl IBSolution {
    pub fn final_objective(&self) -> f64 {
        *self
            .objective
            .last()
            .expect("trace holds the initial objective")
    }
}

fn ib_update(
    p: &DiscreteJoint,
    px: &[f64],
    py_x: &RealMatrix,
    q: &RealMatrix,
    beta: f64,
) -> Result<RealMatrix> {
    let (nx, nz, ny) = (p.x_card(), q.cols(), p.y_card());
    let qz: Vec<f64> = (0..nz)
        .map(|z| (0..nx).map(|x| px[x] * q[(x, z)]).sum())
        .collect();
    let pzy = q.transpose().matmul(&p.p)?;
    let log_qy_z = RealMatrix::from_fn(nz, ny, |z, y| {
        if qz[z] > 0.0 {
            (pzy[(z, y)] / qz[z]).max(LOG_FLOOR).ln()
        } else {
            LOG_FLOOR.ln()
        }
    });
    let mut next = RealMatrix::zeros(nx, nz);
    let mut logits = vec![0.0; nz];
    for x in 0..nx {
        for (z, l) in logits.iter_mut().enumerate() {
            if qz[z] <= 0.0 {
                *l = f64::NEG_INFINITY;
                continue;
            }
            let kl: f64 = (0..ny)
                .filter(|&y| py_x[(x, y)] > 0.0)
                .map(|y| py_x[(x, y)] * (py_x[(x, y)].ln() - log_qy_z[(z, y)]))
                .sum();
            *l = qz[z].ln() - beta * kl;
        }
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for (z, &l) in logits.iter().enumerate() {
            let e = if l == f64::NEG_INFINITY {
                0.0
            } else {
                (l - top).exp()
            };
            next[(x, z)] = e;
            s += e;
        }
        for v in next.row_mut(x) {
            *v /= s;
        }
    }
    Ok(next)
}

/// Runs the self-consistent iteration from `init` until the largest entry
/// change drops below `tol` or `max_iters` updates have been made.
pub fn ib_solve(
    p: &DiscreteJoint,
    beta: f64,
    z_card: usize,
    init: &IBEncoder,
    max_iters: usize,
    tol: f64,
) -> Result<IBSolution> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(invalid(format!(
            "beta must be finite and nonnegative, got {beta}"
        )));
    }
    if z_card == 0 || init.z_card() != z_card || init.q.rows() != p.x_card() {
        return Err(invalid("initial encoder shape does not match |X| x z_card"));
    }
    let px = p.px();
    let py_x = RealMatrix::from_fn(p.x_card(), p.y_card(), |x, y| p.p[(x, y)] / px[x]);
    let objective_of = |q: &IBEncoder| -> Result<f64> {
        let (ixz, izy) = information_pair(p, q)?;
        Ok(ixz - beta * izy)
    };

    let mut enc = init.clone();
    let mut objective = vec![objective_of(&enc)?];
    let mut converged = false;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iters {
        let next = ib_update(p, &px, &py_x, &enc.q, beta)?;
        residual = next.max_abs_diff(&enc.q);
        enc = IBEncoder { q: next };
        iterations += 1;
        objective.push(objective_of(&enc)?);
        if residual < tol {
            converged = true;
            break;
        }
    }
    let (i_xz, i_zy) = information_pair(p, &enc)?;
    Ok(IBSolution {
        encoder: enc,
        i_xz,
        i_zy,
        objective,
        iterations,
        converged,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbSweepConfig {
    /// Representation alphabet size; `None` means `|X|`.
    pub z_card: Option<usize>,
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
    /// Also start from the best encoder of the previous beta.
    pub warm_start: bool,
}

impl Default for IbSweepConfig {
    fn default() -> Self {
        Self {
            z_card: None,
            restarts: DEFAULT_RESTARTS,
            max_iters: 5000,
            tol: 1e-12,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub beta: f64,
    pub i_xz: f64,
    pub i_zy: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Winning candidate: `0..restarts` are random starts, `restarts` is the
    /// warm start.
    pub candidate: usize,
    pub encoder: IBEncoder,
}

/// Best-of-restarts solutions for each beta, in the given order. Restart `r`
/// always starts from the encoder drawn from `rng.substream(r)`; ties on the
/// objective go to the lower candidate index.
pub fn ib_sweep(
    p: &DiscreteJoint,
    betas: &[f64],
    cfg: &IbSweepConfig,
    rng: &RngStream,
) -> Result<Vec<SweepPoint>> {
    if betas.is_empty() {
        return Err(invalid("beta list is empty"));
    }
    if cfg.restarts == 0 && !cfg.warm_start {
        return Err(invalid("need at least one restart"));
    }
    let z_card = cfg.z_card.unwrap_or(p.x_card());
    let inits: Vec<IBEncoder> = (0..cfg.restarts)
        .map(|r| {
            IBEncoder::perturbed_uniform(
                p.x_card(),
                z_card,
                INIT_PERTURBATION,
                &mut rng.substream(r as u64),
            )
        })
        .collect::<Result<_>>()?;

    let mut out: Vec<SweepPoint> = Vec::with_capacity(betas.len());
    for &beta in betas {
        let mut starts = inits.clone();
        if cfg.warm_start {
            match out.last() {
                Some(prev) => starts.push(prev.encoder.clone()),
                None if cfg.restarts == 0 => starts.push(IBEncoder::perturbed_uniform(
                    p.x_card(),
                    z_card,
                    INIT_PERTURBATION,
                    &mut rng.substream(0),
                )?),
                None => {}
            }
        }
        let solutions: Vec<IBSolution> = starts
            .par_iter()
            .map(|init| ib_solve(p, beta, z_card, init, cfg.max_iters, cfg.tol))
            .collect::<Result<_>>()?;
        let (candidate, best) = solutions
            .into_iter()
            .enumerate()
            .reduce(|a, b| {
                if b.1.final_objective() < a.1.final_objective() {
                    b
                } else {
                    a
                }
            })
            .expect("at least one start");
        out.push(SweepPoint {
            beta,
            i_xz: best.i_xz,
            i_zy: best.i_zy,
            objective: best.final_objective(),
            iterations: best.iterations,
            converged: best.converged,
            candidate,
            encoder: best.encoder,
        });
    }
    Ok(out)
}
