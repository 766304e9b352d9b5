//! Forward CRATE-style blocks: multi-head subspace self-attention (MSSA)
//! and one ISTA sparsification step.

use crate::error::{invalid, Result};
use crate::numkernel::{RealMatrix, RngStream};

/// Parameters shared by one MSSA + ISTA block.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryBlock {
    /// Orthonormal bases `U_k` (d x p), one per head.
    pub heads: Vec<RealMatrix>,
    /// Dictionary `D` (d x atoms) of the sparsification step.
    pub dictionary: RealMatrix,
    pub step: f64,
    pub sparsity_weight: f64,
}

const ORTHONORMAL_TOL: f64 = 1e-8;

impl DictionaryBlock {
    pub fn new(
        heads: Vec<RealMatrix>,
        dictionary: RealMatrix,
        step: f64,
        sparsity_weight: f64,
    ) -> Result<Self> {
        let d = dictionary.rows();
        for (k, u) in heads.iter().enumerate() {
            if u.rows() != d {
                return Err(invalid(format!(
                    "head {k} has {} rows, dictionary has {d}",
                    u.rows()
                )));
            }
            let gram = u.transpose().matmul(u)?;
            if gram.max_abs_diff(&RealMatrix::identity(u.cols())) > ORTHONORMAL_TOL {
                return Err(invalid(format!("head {k} basis is not orthonormal")));
            }
        }
        if !(step >= 0.0 && step.is_finite()) {
            return Err(invalid("step must be finite and nonnegative"));
        }
        if !(sparsity_weight >= 0.0 && sparsity_weight.is_finite()) {
            return Err(invalid("sparsity weight must be finite and nonnegative"));
        }
        Ok(Self {
            heads,
            dictionary,
            step,
            sparsity_weight,
        })
    }

    pub fn dim(&self) -> usize {
        self.dictionary.rows()
    }
}

/// Gaussian `d x p` matrix orthonormalized by modified Gram-Schmidt.
pub fn random_orthonormal_basis(d: usize, p: usize, rng: &mut RngStream) -> Result<RealMatrix> {
    if p == 0 || p > d {
        return Err(invalid(format!("need 1 <= p <= d, got p = {p}, d = {d}")));
    }
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    while cols.len() < p {
        let mut v: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        for _ in 0..2 {
            for c in &cols {
                let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                for (a, b) in v.iter_mut().zip(c) {
                    *a -= dot * b;
                }
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            cols.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    Ok(RealMatrix::from_fn(d, p, |i, j| cols[j][i]))
}

/// Gaussian `d x atoms` dictionary with unit-norm columns.
pub fn unit_norm_dictionary(d: usize, atoms: usize, rng: &mut RngStream) -> Result<RealMatrix> {
    if d == 0 || atoms == 0 {
        return Err(invalid("dictionary needs d >= 1 and atoms >= 1"));
    }
    let mut m = RealMatrix::from_fn(d, atoms, |_, _| rng.standard_normal());
    for j in 0..atoms {
        let col = m.column(j);
        let n = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scaled: Vec<f64> = col.iter().map(|x| x / n).collect();
        m.set_column(j, &scaled);
    }
    Ok(m)
}

/// Column-wise softmax of `S^T S / sqrt(p)` with `S = U^T tokens`; every
/// column of the returned `n x n` matrix sums to one.
pub fn mssa_attention(tokens: &RealMatrix, head: &RealMatrix) -> Result<RealMatrix> {
    if head.rows() != tokens.rows() {
        return Err(invalid(format!(
            "head has {} rows but tokens have dimension {}",
            head.rows(),
            tokens.rows()
        )));
    }
    let p = head.cols().max(1) as f64;
    let s = head.transpose().matmul(tokens)?;
    let scores = s.transpose().matmul(&s)?.scale(1.0 / p.sqrt());
    let n = tokens.cols();
    let mut attn = RealMatrix::zeros(n, n);
    for j in 0..n {
        let top = (0..n)
            .map(|i| scores[(i, j)])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for i in 0..n {
            let e = (scores[(i, j)] - top).exp();
            attn[(i, j)] = e;
            total += e;
        }
        for i in 0..n {
            attn[(i, j)] /= total;
        }
    }
    Ok(attn)
}

/// `tokens + step * sum_k U_k (U_k^T tokens) A_k`.
pub fn mssa_forward(tokens: &RealMatrix, block: &DictionaryBlock) -> Result<RealMatrix> {
    if tokens.rows() != block.dim() {
        return Err(invalid(format!(
            "tokens have dimension {}, block expects {}",
            tokens.rows(),
            block.dim()
        )));
    }
    let mut out = tokens.clone();
    for u in &block.heads {
        let s = u.transpose().matmul(tokens)?;
        let attn = mssa_attention(tokens, u)?;
        let mixed = u.matmul(&s.matmul(&attn)?)?;
        out = out.add_scaled(block.step, &mixed)?;
    }
    Ok(out)
}

/// One nonnegative ISTA step on `1/2 ||target - D codes||^2 + lambda ||codes||_1`:
/// `max(0, codes + step D^T (target - D codes) - step lambda)`.
pub fn ista_step(
    codes: &RealMatrix,
    target: &RealMatrix,
    block: &DictionaryBlock,
) -> Result<RealMatrix> {
    let d = &block.dictionary;
    if codes.rows() != d.cols() || target.rows() != d.rows() || codes.cols() != target.cols() {
        return Err(invalid(
            "codes, target and dictionary shapes are inconsistent",
        ));
    }
    let residual = target.add_scaled(-1.0, &d.matmul(codes)?)?;
    let grad = d.transpose().matmul(&residual)?;
    let shift = block.step * block.sparsity_weight;
    let moved = codes.add_scaled(block.step, &grad)?;
    Ok(moved.map(|x| (x - shift).max(0.0)))
}

/// `1/2 ||target - D codes||_F^2 + lambda sum |codes|`.
pub fn lasso_objective(
    codes: &RealMatrix,
    target: &RealMatrix,
    dictionary: &RealMatrix,
    lambda: f64,
) -> Result<f64> {
    let residual = target.add_scaled(-1.0, &dictionary.matmul(codes)?)?;
    let l1: f64 = codes.as_slice().iter().map(|x| x.abs()).sum();
    Ok(0.5 * residual.frobenius_norm_sq() + lambda * l1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first_columns(d: usize, p: usize) -> RealMatrix {
        RealMatrix::from_fn(d, p, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[test]
    fn single_token_closed_form() {
        let u = first_columns(3, 2);
        let block =
            DictionaryBlock::new(vec![u.clone()], RealMatrix::identity(3), 1.0, 0.0).unwrap();
        let x = RealMatrix::from_vec(3, 1, vec![1.0, -2.0, 3.0]).unwrap();
        let attn = mssa_attention(&x, &u).unwrap();
        assert_eq!(attn[(0, 0)], 1.0);
        let out = mssa_forward(&x, &block).unwrap();
        let expected = RealMatrix::from_vec(3, 1, vec![2.0, -4.0, 3.0]).unwrap();
        assert!(out.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn zero_tokens_stay_zero_and_zero_step_is_identity() {
        let block =
            DictionaryBlock::new(vec![first_columns(4, 2)], RealMatrix::identity(4), 1.0, 0.0)
                .unwrap();
        let zeros = RealMatrix::zeros(4, 5);
        assert_eq!(mssa_forward(&zeros, &block).unwrap(), zeros);
        let still = DictionaryBlock { step: 0.0, ..block };
        let x = RealMatrix::from_fn(4, 3, |i, j| (i as f64) - (j as f64) * 0.5);
        assert_eq!(mssa_forward(&x, &still).unwrap(), x);
    }

    #[test]
    fn non_orthonormal_head_rejected() {
        let bad = RealMatrix::from_fn(3, 1, |_, _| 1.0);
        assert!(DictionaryBlock::new(vec![bad], RealMatrix::identity(3), 1.0, 0.0).is_err());
        let block =
            DictionaryBlock::new(vec![first_columns(3, 1)], RealMatrix::identity(3), 1.0, 0.0)
                .unwrap();
        assert!(mssa_forward(&RealMatrix::zeros(2, 2), &block).is_err());
    }

    #[test]
    fn ista_fixed_point_and_threshold() {
        let target = RealMatrix::from_fn(3, 2, |i, j| (i + j) as f64 * 0.3);
        let block = DictionaryBlock::new(vec![], RealMatrix::identity(3), 0.5, 0.0).unwrap();
        assert_eq!(ista_step(&target, &target, &block).unwrap(), target);
        let heavy = DictionaryBlock {
            sparsity_weight: 100.0,
            ..block
        };
        let out = ista_step(&target, &target, &heavy).unwrap();
        assert!(out.as_slice().iter().all(|&x| x == 0.0));
    }
}
