//! Deterministic Nelder-Mead maximizer with a full evaluation log.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    pub max_evals: usize,
    /// Offset of the initial simplex vertices along each axis.
    pub initial_step: f64,
    /// Stop when the spread of vertex values is below this.
    pub f_tol: f64,
    /// ... and the simplex fits in a box of this half-width.
    pub x_tol: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            max_evals: 600,
            initial_step: 0.25,
            f_tol: 1e-12,
            x_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub best_x: Vec<f64>,
    pub best_value: f64,
    /// Every evaluated point with its value, in evaluation order.
    pub log: Vec<(Vec<f64>, f64)>,
}

/// Maximizes `f` starting from a simplex around `x0` (standard coefficients:
/// reflection 1, expansion 2, contraction 1/2, shrink 1/2). Non-finite
/// values are treated as `-inf`.
pub fn nelder_mead_maximize(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    cfg: &NelderMeadConfig,
) -> NelderMeadResult {
    let n = x0.len();
    let mut log: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut eval = |x: &[f64], log: &mut Vec<(Vec<f64>, f64)>| -> f64 {
        let v = f(x);
        let v = if v.is_finite() { v } else { f64::NEG_INFINITY };
        log.push((x.to_vec(), v));
        v
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(x0, &mut log);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += cfg.initial_step;
        let v = eval(&x, &mut log);
        simplex.push((x, v));
    }

    while log.len() < cfg.max_evals && n > 0 {
        // best first; ties keep insertion order
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = (best - worst).abs();
        let width = simplex
            .iter()
            .skip(1)
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= cfg.f_tol && width <= cfg.x_tol {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(1.0);
        let vr = eval(&xr, &mut log);
        if vr > simplex[0].1 {
            let xe = along(2.0);
            let ve = eval(&xe, &mut log);
            simplex[n] = if ve > vr { (xe, ve) } else { (xr, vr) };
            continue;
        }
        if vr > simplex[n - 1].1 {
            simplex[n] = (xr, vr);
            continue;
        }
        let accepted = if vr > simplex[n].1 {
            let xc = along(0.5);
            let vc = eval(&xc, &mut log);
            (vc >= vr).then_some((xc, vc))
        } else {
            let xc = along(-0.5);
            let vc = eval(&xc, &mut log);
            (vc > simplex[n].1).then_some((xc, vc))
        };
        if let Some(vertex) = accepted {
            simplex[n] = vertex;
            continue;
        }
        // shrink toward the best vertex
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = anchor
                .iter()
                .zip(&vertex.0)
                .map(|(a, b)| a + 0.5 * (b - a))
                .collect();
            let v = eval(&x, &mut log);
            *vertex = (x, v);
        }
    }

    let (best_x, best_value) = log
        .iter()
        .fold((x0.to_vec(), f64::NEG_INFINITY), |acc, (x, v)| {
            if *v > acc.1 {
                (x.clone(), *v)
            } else {
                acc
            }
        });
    NelderMeadResult {
        best_x,
        best_value,
        log,
    }
}
