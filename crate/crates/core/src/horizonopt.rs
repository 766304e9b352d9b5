//! Finite-horizon step sizes for gradient descent on quadratics whose
//! Hessian spectrum lies in `[mu, l]`.
//!
//! After `T` steps the error along an eigenvector with eigenvalue `lambda`
//! is scaled by `p(lambda) = prod_t (1 - steps_t lambda)`, so the worst-case
//! contraction of a schedule is `max_{lambda in [mu, l]} |p(lambda)|`.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StepSchedule {
    pub steps: Vec<f64>,
    pub mu: f64,
    pub l: f64,
}

impl StepSchedule {
    pub fn new(steps: Vec<f64>, mu: f64, l: f64) -> Result<Self> {
        check_interval(mu, l)?;
        if let Some(s) = steps.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(invalid(format!(
                "steps must be positive and finite, got {s}"
            )));
        }
        Ok(Self { steps, mu, l })
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// `prod_t (1 - steps_t lambda)`.
    pub fn polynomial(&self, lambda: f64) -> f64 {
        self.steps.iter().map(|a| 1.0 - a * lambda).product()
    }

    fn derivative(&self, lambda: f64) -> f64 {
        // sum_t -a_t prod_{s != t} (1 - a_s lambda) via prefix/suffix products
        let factors: Vec<f64> = self.steps.iter().map(|a| 1.0 - a * lambda).collect();
        let n = factors.len();
        let mut suffix = vec![1.0; n + 1];
        for i in (0..n).rev() {
            suffix[i] = suffix[i + 1] * factors[i];
        }
        let mut prefix = 1.0;
        let mut d = 0.0;
        for i in 0..n {
            d -= self.steps[i] * prefix * suffix[i + 1];
            prefix *= factors[i];
        }
        d
    }
}

fn check_interval(mu: f64, l: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite() && l >= mu && l.is_finite()) {
        return Err(invalid(format!("need 0 < mu <= l, got mu = {mu}, l = {l}")));
    }
    Ok(())
}

/// Worst-case factor `max |p(lambda)|` over `[mu, l]`: a grid of
/// `max(10 T^2, 2)` points including both endpoints, refined by bisection on
/// every sign change of `p'` between neighboring grid points.
pub fn worst_case_factor(s: &StepSchedule) -> f64 {
    let t = s.horizon();
    if t == 0 {
        return 1.0;
    }
    let n = (10 * t * t).max(2);
    let width = s.l - s.mu;
    let at = |i: usize| {
        if i == n - 1 {
            s.l
        } else {
            s.mu + width * i as f64 / (n - 1) as f64
        }
    };
    let mut best = s.polynomial(s.mu).abs().max(s.polynomial(s.l).abs());
    if width == 0.0 {
        return best;
    }
    let mut prev_x = at(0);
    let mut prev_d = s.derivative(prev_x);
    for i in 1..n {
        let x = at(i);
        best = best.max(s.polynomial(x).abs());
        let d = s.derivative(x);
        if prev_d * d < 0.0 {
            let root = bisect(|v| s.derivative(v), prev_x, x, prev_d);
            best = best.max(s.polynomial(root).abs());
        }
        prev_x = x;
        prev_d = d;
    }
    best
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, f_lo: f64) -> f64 {
    let lo_sign = f_lo.signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Reciprocals of the Chebyshev nodes
/// `(l + mu)/2 + (l - mu)/2 cos((2i - 1) pi / (2t))`, `i = 1..=t`.
pub fn chebyshev_schedule(t: usize, mu: f64, l: f64) -> Result<StepSchedule> {
    if t == 0 {
        return Err(invalid("horizon must be at least 1"));
    }
    check_interval(mu, l)?;
    let mid = 0.5 * (l + mu);
    let half = 0.5 * (l - mu);
    let steps = (1..=t)
        .map(|i| 1.0 / (mid + half * ((2 * i - 1) as f64 * PI / (2 * t) as f64).cos()))
        .collect();
    StepSchedule::new(steps, mu, l)
}

/// The step `2/(mu + l)` repeated `t` times.
pub fn best_constant_schedule(t: usize, mu: f64, l: f64) -> Result<StepSchedule> {
    if t == 0 {
        return Err(invalid("horizon must be at least 1"));
    }
    check_interval(mu, l)?;
    StepSchedule::new(vec![2.0 / (mu + l); t], mu, l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_schedule_has_unit_factor() {
        assert_eq!(
            worst_case_factor(&StepSchedule::new(vec![], 1.0, 3.0).unwrap()),
            1.0
        );
    }

    #[test]
    fn one_step_optimum() {
        let s = best_constant_schedule(1, 1.0, 3.0).unwrap();
        assert_eq!(s.steps, vec![0.5]);
        assert!((worst_case_factor(&s) - 0.5).abs() < 1e-12);
        let c = chebyshev_schedule(1, 1.0, 3.0).unwrap();
        assert!((c.steps[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_node_closed_form() {
        let c = chebyshev_schedule(2, 1.0, 3.0).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((c.steps[0] - 1.0 / (2.0 + r)).abs() < 1e-15);
        assert!((c.steps[1] - 1.0 / (2.0 - r)).abs() < 1e-15);
    }

    #[test]
    fn constant_factor_is_a_power() {
        for t in 1..6 {
            let s = best_constant_schedule(t, 1.0, 10.0).unwrap();
            assert!((worst_case_factor(&s) - (9.0f64 / 11.0).powi(t as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_interval_rejected() {
        assert!(chebyshev_schedule(3, 0.0, 1.0).is_err());
        assert!(chebyshev_schedule(3, 2.0, 1.0).is_err());
        assert!(StepSchedule::new(vec![-1.0], 1.0, 2.0).is_err());
    }
}
