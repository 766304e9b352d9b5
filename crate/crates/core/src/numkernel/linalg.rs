use super::matrix::{norm_sq, Matrix, RealMatrix, Scalar};
use crate::error::{domain, invalid, Result};

/// Iteration cap of the power method in [`spectral_norm`].
pub const SPECTRAL_NORM_MAX_ITERS: usize = 20_000;

const HERMITIAN_TOL: f64 = 1e-10;

fn pivot_tolerance<T: Scalar>(a: &Matrix<T>) -> f64 {
    let scale = (0..a.rows()).fold(0.0_f64, |m, i| m.max(a[(i, i)].re().abs()));
    64.0 * f64::EPSILON * a.rows() as f64 * scale.max(f64::MIN_POSITIVE)
}

/// Outcome of a Cholesky sweep on a Hermitian PSD matrix.
struct CholeskyParts<T> {
    lower: Matrix<T>,
    singular: bool,
}

fn cholesky_inner<T: Scalar>(a: &Matrix<T>) -> Result<CholeskyParts<T>> {
    let n = a.rows();
    let tol = pivot_tolerance(a);
    let mut l = Matrix::<T>::zeros(n, n);
    let mut singular = false;
    for j in 0..n {
        let mut d = a[(j, j)].re();
        for k in 0..j {
            d -= l[(j, k)].abs_sq();
        }
        if d < -tol {
            return Err(domain(format!("matrix is indefinite (pivot {d:e} at {j})")));
        }
        if d <= tol {
            // PSD with a zero pivot forces the rest of this Schur column to vanish.
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                if s.abs() > tol.sqrt() * (1.0 + a[(i, i)].re().abs()).sqrt() {
                    return Err(domain(
                        "matrix is indefinite (nonzero column under a zero pivot)",
                    ));
                }
            }
            singular = true;
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = T::from_real(ljj);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / T::from_real(ljj);
        }
    }
    Ok(CholeskyParts { lower: l, singular })
}

fn check_hermitian<T: Scalar>(a: &Matrix<T>) -> Result<()> {
    if !a.is_square() {
        return Err(domain(format!(
            "expected a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.all_finite() {
        return Err(domain("matrix has non-finite entries"));
    }
    let tol = HERMITIAN_TOL * a.max_abs().max(1.0);
    if !a.is_hermitian(tol) {
        return Err(domain("matrix is not Hermitian"));
    }
    Ok(())
}

/// Lower-triangular `L` with `A = L L^H` for Hermitian positive-definite `A`.
pub fn cholesky<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    check_hermitian(a)?;
    let parts = cholesky_inner(a)?;
    if parts.singular {
        return Err(domain("matrix is singular"));
    }
    Ok(parts.lower)
}

/// Natural log-determinant of a Hermitian positive-semidefinite matrix,
/// via Cholesky. Singular PSD input yields `-inf`.
pub fn logdet_psd<T: Scalar>(a: &Matrix<T>) -> Result<f64> {
    check_hermitian(a)?;
    let parts = cholesky_inner(a)?;
    if parts.singular {
        return Ok(f64::NEG_INFINITY);
    }
    Ok((0..a.rows())
        .map(|i| 2.0 * parts.lower[(i, i)].re().ln())
        .sum())
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky; the result
/// is exactly Hermitian.
pub fn inverse_hpd<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let l = cholesky(a)?;
    let n = a.rows();
    let mut inv = Matrix::<T>::zeros(n, n);
    let mut y = vec![T::zero(); n];
    for col in 0..n {
        // L y = e_col
        for i in 0..n {
            let mut s = if i == col { T::one() } else { T::zero() };
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        // L^H x = y
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[(k, i)].conj() * inv[(k, col)];
            }
            inv[(i, col)] = s / l[(i, i)];
        }
    }
    inv.symmetrize();
    Ok(inv)
}

/// Solves `A X = B` by LU with partial pivoting.
pub fn solve<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if !a.is_square() || a.rows() != b.rows() {
        return Err(invalid(format!(
            "cannot solve {}x{} system with {}x{} right-hand side",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let n = a.rows();
    let mut lu = a.clone();
    let mut x = b.clone();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold(
                (k, -1.0),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
        if pmax <= f64::EPSILON * scale * n as f64 {
            return Err(domain("singular system"));
        }
        if p != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = t;
            }
            for j in 0..x.cols() {
                let t = x[(k, j)];
                x[(k, j)] = x[(p, j)];
                x[(p, j)] = t;
            }
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let f = lu[(i, k)] / pivot;
            if f == T::zero() {
                continue;
            }
            for j in k..n {
                let v = lu[(k, j)];
                lu[(i, j)] -= f * v;
            }
            for j in 0..x.cols() {
                let v = x[(k, j)];
                x[(i, j)] -= f * v;
            }
        }
    }
    for j in 0..x.cols() {
        for i in (0..n).rev() {
            let mut s = x[(i, j)];
            for k in i + 1..n {
                s -= lu[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s / lu[(i, i)];
        }
    }
    Ok(x)
}

/// Largest singular value by power iteration on the smaller Gram matrix.
///
/// Iterates until successive unit vectors differ by less than `1e-13` or
/// [`SPECTRAL_NORM_MAX_ITERS`] is reached.
pub fn spectral_norm<T: Scalar>(a: &Matrix<T>) -> Result<f64> {
    if a.is_empty() {
        return Err(invalid("spectral norm of an empty matrix"));
    }
    if a.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let gram = if a.cols() <= a.rows() {
        a.adjoint_matmul(a)?
    } else {
        a.adjoint().adjoint_matmul(&a.adjoint())?
    };
    let n = gram.rows();
    let start: Vec<T> = (0..n).map(|i| T::from_real(1.0 + 0.1 * i as f64)).collect();
    let mut v = normalized(&start);
    let mut w = gram.mul_vec(&v)?;
    if norm_sq(&w) == 0.0 {
        // start vector in the null space; fall back to the heaviest column
        let j = (0..n)
            .max_by(|&x, &y| gram[(x, x)].re().total_cmp(&gram[(y, y)].re()))
            .unwrap_or(0);
        v = (0..n)
            .map(|i| if i == j { T::one() } else { T::zero() })
            .collect();
        w = gram.mul_vec(&v)?;
    }
    for _ in 0..SPECTRAL_NORM_MAX_ITERS {
        let next = normalized(&w);
        let delta: f64 = next
            .iter()
            .zip(&v)
            .map(|(&p, &q)| (p - q).abs_sq())
            .sum::<f64>()
            .sqrt();
        v = next;
        w = gram.mul_vec(&v)?;
        if delta < 1e-13 {
            break;
        }
    }
    // Rayleigh quotient of the Gram matrix is sigma_max^2
    let rq = v
        .iter()
        .zip(&w)
        .fold(T::zero(), |acc, (&x, &y)| acc + x.conj() * y)
        .re();
    Ok(rq.max(0.0).sqrt())
}

fn normalized<T: Scalar>(v: &[T]) -> Vec<T> {
    let n = norm_sq(v).sqrt();
    v.iter().map(|&x| x * T::from_real(1.0 / n)).collect()
}

/// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi sweeps.
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// columns.
pub fn symmetric_eigen(a: &RealMatrix) -> Result<(Vec<f64>, RealMatrix)> {
    check_hermitian(a)?;
    let n = a.rows();
    let mut m = a.clone();
    m.symmetrize();
    let mut v = RealMatrix::identity(n);
    let total = m.frobenius_norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = RealMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{ComplexMatrix, RngStream};
    use num_complex::Complex64;

    fn random_hpd(n: usize, seed: u64) -> ComplexMatrix {
        let mut rng = RngStream::new(seed, 0);
        let g = ComplexMatrix::from_fn(n, n + 2, |_, _| rng.complex_gaussian());
        let mut a = g.matmul(&g.adjoint()).unwrap();
        a.symmetrize();
        a
    }

    #[test]
    fn logdet_closed_forms() {
        assert_eq!(logdet_psd(&RealMatrix::identity(3)).unwrap(), 0.0);
        let d = RealMatrix::from_diag(&[1.0, 2.0, 4.0]);
        assert!((logdet_psd(&d).unwrap() - 8f64.ln()).abs() < 1e-15);
        let c = 2.5;
        let scaled = RealMatrix::identity(5).scale(c);
        assert!((logdet_psd(&scaled).unwrap() - 5.0 * c.ln()).abs() < 1e-13);
    }

    #[test]
    fn logdet_rejects_bad_input() {
        let nonherm = RealMatrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(logdet_psd(&nonherm), Err(crate::Error::Domain(_))));
        let indefinite = RealMatrix::from_diag(&[1.0, -1.0]);
        assert!(matches!(
            logdet_psd(&indefinite),
            Err(crate::Error::Domain(_))
        ));
        let swap = RealMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(logdet_psd(&swap).is_err());
        assert!(logdet_psd(&RealMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn logdet_of_singular_psd_is_neg_infinity() {
        let rank_one = RealMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(logdet_psd(&rank_one).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn inverse_hpd_roundtrip() {
        let a = random_hpd(5, 3);
        let inv = inverse_hpd(&a).unwrap();
        let prod = a.matmul(&inv).unwrap();
        assert!(prod.max_abs_diff(&ComplexMatrix::identity(5)) < 1e-10);
    }

    #[test]
    fn lu_solve_matches_product() {
        let mut rng = RngStream::new(5, 0);
        let a = ComplexMatrix::from_fn(4, 4, |_, _| rng.complex_gaussian());
        let x = ComplexMatrix::from_fn(4, 2, |_, _| rng.complex_gaussian());
        let b = a.matmul(&x).unwrap();
        assert!(solve(&a, &b).unwrap().max_abs_diff(&x) < 1e-10);
        assert!(solve(&RealMatrix::zeros(2, 2), &RealMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn spectral_norm_closed_forms() {
        assert!((spectral_norm(&RealMatrix::identity(4)).unwrap() - 1.0).abs() < 1e-12);
        let d = RealMatrix::from_diag(&[3.0, 1.0]);
        assert!((spectral_norm(&d).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(spectral_norm(&RealMatrix::zeros(2, 2)).unwrap(), 0.0);
        assert!(spectral_norm(&RealMatrix::zeros(0, 0)).is_err());
        // start vector orthogonal to the top direction
        let e = ComplexMatrix::from_diag(&[Complex64::new(0.0, 0.0), Complex64::new(2.0, 0.0)]);
        assert!((spectral_norm(&e).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_reconstructs() {
        let mut rng = RngStream::new(11, 0);
        let g = RealMatrix::from_fn(6, 6, |_, _| rng.standard_normal());
        let mut a = g.matmul(&g.transpose()).unwrap();
        a.symmetrize();
        let (vals, vecs) = symmetric_eigen(&a).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let rebuilt = vecs
            .matmul(&RealMatrix::from_diag(&vals))
            .unwrap()
            .matmul(&vecs.transpose())
            .unwrap();
        assert!(rebuilt.max_abs_diff(&a) < 1e-10);
    }
}
