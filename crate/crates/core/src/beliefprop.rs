//! Sum-product belief propagation on discrete factor graphs, plus exact
//! marginals by enumeration for checking it.

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, resource, Result};

/// Messages are floored here before normalization.
pub const MESSAGE_FLOOR: f64 = 1e-300;
/// Largest joint alphabet [`brute_force_marginals`] will enumerate.
pub const MAX_JOINT_STATES: usize = 1_000_000;

/// Nonnegative table over the joint alphabet of `vars`, row-major with the
/// first variable varying slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Factor {
    pub vars: Vec<usize>,
    pub table: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorGraph {
    pub cardinalities: Vec<usize>,
    pub factors: Vec<Factor>,
}

impl FactorGraph {
    pub fn new(cardinalities: Vec<usize>, factors: Vec<Factor>) -> Result<Self> {
        let g = Self {
            cardinalities,
            factors,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(v) = self.cardinalities.iter().position(|&c| c == 0) {
            return Err(invalid(format!("variable {v} has cardinality 0")));
        }
        for (f, factor) in self.factors.iter().enumerate() {
            let mut size = 1usize;
            for (i, &v) in factor.vars.iter().enumerate() {
                let card = *self.cardinalities.get(v).ok_or_else(|| {
                    invalid(format!("factor {f} references missing variable {v}"))
                })?;
                if factor.vars[..i].contains(&v) {
                    return Err(invalid(format!("factor {f} lists variable {v} twice")));
                }
                size = size
                    .checked_mul(card)
                    .ok_or_else(|| invalid(format!("factor {f} table size overflows")))?;
            }
            if factor.table.len() != size {
                return Err(invalid(format!(
                    "factor {f} table has {} entries, expected {size}",
                    factor.table.len()
                )));
            }
            if factor.table.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                return Err(invalid(format!(
                    "factor {f} has a negative or non-finite entry"
                )));
            }
            if !factor.table.iter().any(|&x| x > 0.0) {
                return Err(invalid(format!("factor {f} is identically zero")));
            }
        }
        Ok(())
    }

    pub fn num_variables(&self) -> usize {
        self.cardinalities.len()
    }
}

/// Decodes a row-major table index into per-variable states.
fn decode(mut index: usize, cards: &[usize], out: &mut [usize]) {
    for i in (0..cards.len()).rev() {
        out[i] = index % cards[i];
        index /= cards[i];
    }
}

fn normalize_floored(m: &mut [f64]) {
    for v in m.iter_mut() {
        *v = v.max(MESSAGE_FLOOR);
    }
    let s: f64 = m.iter().sum();
    for v in m.iter_mut() {
        *v /= s;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpResult {
    /// One distribution per variable.
    pub marginals: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
}

/// Flooding-schedule sum-product. Every round recomputes all messages from
/// the previous round's messages, mixes in `damping` of the old value and
/// renormalizes. Stops once no message entry moves by `tol` or more.
pub fn sum_product(g: &FactorGraph, max_iters: usize, damping: f64, tol: f64) -> Result<BpResult> {
    g.validate()?;
    if !(0.0..1.0).contains(&damping) {
        return Err(invalid(format!(
            "damping must lie in [0, 1), got {damping}"
        )));
    }
    // edge e = (factor, position); var_edges lists the edges touching each variable
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut factor_edges: Vec<Vec<usize>> = Vec::with_capacity(g.factors.len());
    let mut var_edges: Vec<Vec<usize>> = vec![Vec::new(); g.num_variables()];
    for (f, factor) in g.factors.iter().enumerate() {
        let mut ids = Vec::with_capacity(factor.vars.len());
        for (i, &v) in factor.vars.iter().enumerate() {
            ids.push(edges.len());
            var_edges[v].push(edges.len());
            edges.push((f, i));
        }
        factor_edges.push(ids);
    }
    let card_of = |e: usize| g.cardinalities[g.factors[edges[e].0].vars[edges[e].1]];
    let uniform = |e: usize| vec![1.0 / card_of(e) as f64; card_of(e)];
    let mut to_factor: Vec<Vec<f64>> = (0..edges.len()).map(uniform).collect();
    let mut to_var: Vec<Vec<f64>> = (0..edges.len()).map(uniform).collect();

    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let mut new_to_factor = Vec::with_capacity(edges.len());
        for (e, &(f, i)) in edges.iter().enumerate() {
            let v = g.factors[f].vars[i];
            let mut m = vec![1.0; card_of(e)];
            for &other in var_edges[v].iter().filter(|&&o| o != e) {
                for (a, b) in m.iter_mut().zip(&to_var[other]) {
                    *a *= b;
                }
            }
            normalize_floored(&mut m);
            new_to_factor.push(m);
        }
        let mut new_to_var: Vec<Vec<f64>> =
            (0..edges.len()).map(|e| vec![0.0; card_of(e)]).collect();
        for (f, factor) in g.factors.iter().enumerate() {
            let cards: Vec<usize> = factor.vars.iter().map(|&v| g.cardinalities[v]).collect();
            let ids = &factor_edges[f];
            let mut states = vec![0; cards.len()];
            for (idx, &val) in factor.table.iter().enumerate() {
                if val == 0.0 {
                    continue;
                }
                decode(idx, &cards, &mut states);
                for i in 0..ids.len() {
                    let mut w = val;
                    for (j, &ej) in ids.iter().enumerate() {
                        if j != i {
                            w *= to_factor[ej][states[j]];
                        }
                    }
                    new_to_var[ids[i]][states[i]] += w;
                }
            }
        }
        let mut change = 0.0f64;
        for (old, mut new) in to_factor
            .iter_mut()
            .zip(new_to_factor)
            .chain(to_var.iter_mut().zip(new_to_var))
        {
            normalize_floored(&mut new);
            if damping > 0.0 {
                for (n, o) in new.iter_mut().zip(old.iter()) {
                    *n = (1.0 - damping) * *n + damping * o;
                }
                normalize_floored(&mut new);
            }
            for (n, o) in new.iter().zip(old.iter()) {
                change = change.max((n - o).abs());
            }
            *old = new;
        }
        if change < tol {
            converged = true;
            break;
        }
    }

    let marginals = (0..g.num_variables())
        .map(|v| {
            let mut m = vec![1.0; g.cardinalities[v]];
            for &e in &var_edges[v] {
                for (a, b) in m.iter_mut().zip(&to_var[e]) {
                    *a *= b;
                }
            }
            normalize_floored(&mut m);
            m
        })
        .collect();
    Ok(BpResult {
        marginals,
        converged,
        iterations,
    })
}

/// Exact marginals by enumerating the full joint alphabet.
pub fn brute_force_marginals(g: &FactorGraph) -> Result<Vec<Vec<f64>>> {
    g.validate()?;
    let mut total_states = 1usize;
    for &c in &g.cardinalities {
        total_states = match total_states.checked_mul(c) {
            Some(n) if n <= MAX_JOINT_STATES => n,
            _ => {
                return Err(resource(format!(
                    "joint alphabet exceeds {MAX_JOINT_STATES} states"
                )))
            }
        };
    }
    let mut marginals: Vec<Vec<f64>> = g.cardinalities.iter().map(|&c| vec![0.0; c]).collect();
    let mut states = vec![0usize; g.num_variables()];
    let mut z = 0.0;
    for idx in 0..total_states {
        decode(idx, &g.cardinalities, &mut states);
        let mut w = 1.0;
        for factor in &g.factors {
            let k = factor
                .vars
                .iter()
                .fold(0, |acc, &v| acc * g.cardinalities[v] + states[v]);
            w *= factor.table[k];
            if w == 0.0 {
                break;
            }
        }
        if w == 0.0 {
            continue;
        }
        z += w;
        for (v, &s) in states.iter().enumerate() {
            marginals[v][s] += w;
        }
    }
    if z == 0.0 {
        return Err(domain("the product of factors is identically zero"));
    }
    for m in &mut marginals {
        for p in m.iter_mut() {
            *p /= z;
        }
    }
    Ok(marginals)
}
