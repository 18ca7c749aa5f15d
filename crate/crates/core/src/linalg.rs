//! Dense symmetric linear algebra: cyclic Jacobi eigendecomposition,
//! Cholesky factorization, and the symmetric-definite generalized
//! eigenproblem `M1 v = lambda M2 v` solved by Cholesky reduction.
//!
//! Problem sizes here are correlation-matrix sized (n <= 600), where a dense
//! O(n^3) solve is plenty; Jacobi is chosen for its unconditional stability
//! and machine-precision orthogonality.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

const MAX_JACOBI_SWEEPS: usize = 100;

pub fn frobenius_norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_square_symmetric(a: &Array2<f64>, what: &str) -> Result<()> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::Argument(format!("{what} must be square, got {r}x{c}")));
    }
    let scale = frobenius_norm(a).max(1.0);
    for i in 0..r {
        for j in (i + 1)..r {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-9 * scale {
                return Err(Error::Argument(format!(
                    "{what} is not symmetric at ({i},{j}): {} vs {}",
                    a[(i, j)],
                    a[(j, i)]
                )));
            }
        }
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument(format!("{what} contains non-finite entries")));
    }
    Ok(())
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order with matching orthonormal
/// eigenvector columns. Each eigenvector's sign is fixed so its largest-
/// magnitude component is positive, making results reproducible bit for bit.
pub fn symmetric_eig(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    check_square_symmetric(a, "eigendecomposition input")?;
    let n = a.nrows();
    if n == 0 {
        return Err(Error::Argument("eigendecomposition of empty matrix".into()));
    }

    // Row-major scratch copies; the rotation loops are the hot path.
    let mut m: Vec<f64> = a.iter().cloned().collect();
    let mut v: Vec<f64> = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let idx = |i: usize, j: usize| i * n + j;

    let total = frobenius_norm(a);
    let tol = 1e-14 * total.max(f64::MIN_POSITIVE);

    let mut converged = false;
    for _sweep in 0..MAX_JACOBI_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[idx(p, q)] * m[idx(p, q)];
            }
        }
        if off.sqrt() <= tol {
            converged = true;
            break;
        }

        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[idx(p, q)];
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = m[idx(p, p)];
                let aqq = m[idx(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                m[idx(p, p)] = app - t * apq;
                m[idx(q, q)] = aqq + t * apq;
                m[idx(p, q)] = 0.0;
                m[idx(q, p)] = 0.0;
                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = m[idx(i, p)];
                    let aiq = m[idx(i, q)];
                    m[idx(i, p)] = c * aip - s * aiq;
                    m[idx(p, i)] = m[idx(i, p)];
                    m[idx(i, q)] = s * aip + c * aiq;
                    m[idx(q, i)] = m[idx(i, q)];
                }
                for i in 0..n {
                    let vip = v[idx(i, p)];
                    let viq = v[idx(i, q)];
                    v[idx(i, p)] = c * vip - s * viq;
                    v[idx(i, q)] = s * vip + c * viq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::Numeric(format!(
            "Jacobi eigensolver did not converge in {MAX_JACOBI_SWEEPS} sweeps for n={n}"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[idx(i, i)]
            .partial_cmp(&m[idx(j, j)])
            .unwrap()
            .then(i.cmp(&j))
    });

    let mut values = Array1::zeros(n);
    let mut vectors = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        values[col] = m[idx(src, src)];
        // sign fix: largest-magnitude component positive
        let mut best = 0usize;
        let mut best_abs = 0.0;
        for i in 0..n {
            let x = v[idx(i, src)].abs();
            if x > best_abs {
                best_abs = x;
                best = i;
            }
        }
        let flip = if v[idx(best, src)] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, col)] = flip * v[idx(i, src)];
        }
    }
    Ok((values, vectors))
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>> {
    check_square_symmetric(a, "Cholesky input")?;
    let n = a.nrows();
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::Numeric(format!(
                        "matrix not positive definite: pivot {sum} at {i}"
                    )));
                }
                l[(i, j)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solve `L x = b` for lower-triangular `L` (forward substitution), in place.
pub(crate) fn solve_lower_inplace(l: &Array2<f64>, b: &mut [f64]) {
    let n = l.nrows();
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[(i, k)] * b[k];
        }
        b[i] = sum / l[(i, i)];
    }
}

/// Solve `L^T x = b` for lower-triangular `L` (back substitution), in place.
pub(crate) fn solve_lower_transpose_inplace(l: &Array2<f64>, b: &mut [f64]) {
    let n = l.nrows();
    for i in (0..n).rev() {
        let mut sum = b[i];
        for k in (i + 1)..n {
            sum -= l[(k, i)] * b[k];
        }
        b[i] = sum / l[(i, i)];
    }
}

/// Determinant via LU decomposition with partial pivoting.
pub fn determinant(a: &Array2<f64>) -> Result<f64> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::Argument(format!("determinant of {r}x{c} matrix")));
    }
    let n = r;
    let mut m: Vec<f64> = a.iter().cloned().collect();
    let idx = |i: usize, j: usize| i * n + j;
    let mut det = 1.0;
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if m[idx(row, col)].abs() > m[idx(pivot, col)].abs() {
                pivot = row;
            }
        }
        if m[idx(pivot, col)] == 0.0 {
            return Ok(0.0);
        }
        if pivot != col {
            for j in 0..n {
                m.swap(idx(pivot, j), idx(col, j));
            }
            det = -det;
        }
        det *= m[idx(col, col)];
        for row in (col + 1)..n {
            let factor = m[idx(row, col)] / m[idx(col, col)];
            for j in col..n {
                m[idx(row, j)] -= factor * m[idx(col, j)];
            }
        }
    }
    Ok(det)
}

/// Solve the symmetric-definite generalized eigenproblem
/// `M1 v = lambda M2 v` with `M2` positive definite.
///
/// Reduction: `M2 = L L^T`, solve the standard symmetric problem on
/// `C = L^-1 M1 L^-T`, and map eigenvectors back as `v = L^-T u`, which makes
/// them M2-orthonormal (`v_i^T M2 v_j = delta_ij`). Eigenvalues ascend.
pub fn generalized_symmetric_eig(
    m1: &Array2<f64>,
    m2: &Array2<f64>,
) -> Result<(Array1<f64>, Array2<f64>)> {
    check_square_symmetric(m1, "M1")?;
    check_square_symmetric(m2, "M2")?;
    if m1.dim() != m2.dim() {
        return Err(Error::Argument(format!(
            "M1 is {:?} but M2 is {:?}",
            m1.dim(),
            m2.dim()
        )));
    }
    let n = m1.nrows();
    let l = cholesky(m2)?;

    // X = L^-1 M1 (column by column), then C^T = L^-1 X^T, so C = (L^-1 (L^-1 M1)^T)^T.
    let mut x = Array2::zeros((n, n));
    let mut col = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            col[i] = m1[(i, j)];
        }
        solve_lower_inplace(&l, &mut col);
        for i in 0..n {
            x[(i, j)] = col[i];
        }
    }
    let mut c = Array2::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            col[i] = x[(j, i)];
        }
        solve_lower_inplace(&l, &mut col);
        for i in 0..n {
            c[(i, j)] = col[i];
        }
    }
    // symmetrize away the last bits of roundoff before Jacobi
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = avg;
            c[(j, i)] = avg;
        }
    }

    let (values, u) = symmetric_eig(&c)?;
    let mut vectors = Array2::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            col[i] = u[(i, j)];
        }
        solve_lower_transpose_inplace(&l, &mut col);
        for i in 0..n {
            vectors[(i, j)] = col[i];
        }
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let x = rng.gen_range(-1.0..1.0);
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
        a
    }

    #[test]
    fn two_by_two_hand_solved() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, vecs) = symmetric_eig(&a).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        assert!((vecs[(0, 1)] - inv_sqrt2).abs() < 1e-12);
        assert!((vecs[(1, 1)] - inv_sqrt2).abs() < 1e-12);
        assert!((vecs[(0, 0)].abs() - inv_sqrt2).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 5, 12, 40] {
            let a = random_symmetric(n, &mut rng);
            let (vals, vecs) = symmetric_eig(&a).unwrap();
            // V diag(vals) V^T == A
            let lam = Array2::from_diag(&vals);
            let recon = vecs.dot(&lam).dot(&vecs.t());
            let err = frobenius_norm(&(&recon - &a)) / frobenius_norm(&a).max(1.0);
            assert!(err < 1e-12, "n={n} reconstruction error {err}");
            let gram = vecs.t().dot(&vecs);
            let eye = Array2::<f64>::eye(n);
            assert!(frobenius_norm(&(&gram - &eye)) < 1e-12);
            // ascending
            for w in vals.as_slice().unwrap().windows(2) {
                assert!(w[0] <= w[1] + 1e-12);
            }
        }
    }

    #[test]
    fn solver_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_symmetric(17, &mut rng);
        let (v1, e1) = symmetric_eig(&a).unwrap();
        let (v2, e2) = symmetric_eig(&a).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(e1, e2);
    }

    #[test]
    fn cholesky_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1, 3, 8, 25] {
            let b = random_symmetric(n, &mut rng);
            let a = b.dot(&b.t()) + Array2::<f64>::eye(n) * (n as f64);
            let l = cholesky(&a).unwrap();
            let err = frobenius_norm(&(&l.dot(&l.t()) - &a)) / frobenius_norm(&a);
            assert!(err < 1e-12);
            for i in 0..n {
                for j in (i + 1)..n {
                    assert_eq!(l[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]]; // eigenvalues 3, -1
        assert!(matches!(cholesky(&a), Err(Error::Numeric(_))));
    }

    #[test]
    fn determinant_matches_closed_forms() {
        let a = array![[3.0, 1.0], [1.0, 2.0]];
        assert!((determinant(&a).unwrap() - 5.0).abs() < 1e-12);
        let b = array![[2.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 4.0]];
        assert!((determinant(&b).unwrap() - 24.0).abs() < 1e-12);
        let singular = array![[1.0, 2.0], [2.0, 4.0]];
        assert!(determinant(&singular).unwrap().abs() < 1e-12);
    }

    #[test]
    fn generalized_reduces_to_standard_with_identity() {
        let m1 = array![[2.0, 1.0], [1.0, 2.0]];
        let m2 = Array2::<f64>::eye(2);
        let (vals, vecs) = generalized_symmetric_eig(&m1, &m2).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        let gram = vecs.t().dot(&vecs);
        assert!(frobenius_norm(&(&gram - &Array2::<f64>::eye(2))) < 1e-10);
    }

    #[test]
    fn generalized_pairs_satisfy_definition_and_m2_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [2, 5, 20] {
            let b = random_symmetric(n, &mut rng);
            let m1 = b.dot(&b.t()); // PSD
            let c = random_symmetric(n, &mut rng);
            let m2 = c.dot(&c.t()) + Array2::<f64>::eye(n) * 1.0; // PD
            let (vals, vecs) = generalized_symmetric_eig(&m1, &m2).unwrap();
            let scale = frobenius_norm(&m1);
            for j in 0..n {
                let v = vecs.column(j).to_owned();
                let resid = &m1.dot(&v) - &(m2.dot(&v) * vals[j]);
                let rnorm = resid.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!(rnorm <= 1e-9 * scale.max(1.0), "residual {rnorm}");
            }
            let gram = vecs.t().dot(&m2).dot(&vecs);
            assert!(frobenius_norm(&(&gram - &Array2::<f64>::eye(n))) < 1e-9);
        }
    }

    #[test]
    fn generalized_requires_positive_definite_m2() {
        let m1 = Array2::<f64>::eye(2);
        let m2 = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(
            generalized_symmetric_eig(&m1, &m2),
            Err(Error::Numeric(_))
        ));
    }
}
