//! Small dense linear algebra used by the metric and embedding code:
//! symmetric eigendecomposition (cyclic Jacobi), Cholesky solves, and
//! row-space orthonormalization.
//!
//! Matrices here are modest (latent dims, GMM component dims, reduced
//! sample spans), so a carefully written Jacobi sweep beats pulling in a
//! LAPACK binding while staying generic over the scalar type.

use crate::real::{real, Real};
use ndarray::{Array1, Array2, ArrayView2};

/// Eigendecomposition of a symmetric matrix.
///
/// Eigenvalues are returned in descending order with matching eigenvector
/// columns. The input is symmetrized as `(A + Aᵀ)/2` before iteration.
pub fn symmetric_eigen<S: Real>(a: &ArrayView2<S>) -> (Array1<S>, Array2<S>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "symmetric_eigen requires a square matrix");
    let mut m = symmetrize(a);
    let mut v = Array2::<S>::eye(n);
    if n <= 1 {
        let vals = Array1::from_iter(m.iter().copied());
        return (vals, v);
    }

    let eps = real::<S>(f64::EPSILON);
    // Convergence threshold scales with the Frobenius norm of the input.
    let norm = m.iter().fold(S::zero(), |acc, &x| acc + x * x).sqrt();
    let tol = if norm == S::zero() {
        eps
    } else {
        norm * eps * real(1e-2)
    };

    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut off = S::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() <= tol * real(1e-8) {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                // Jacobi rotation angle.
                let theta = (aqq - app) / (real::<S>(2.0) * apq);
                let t = {
                    let sign = if theta >= S::zero() {
                        S::one()
                    } else {
                        -S::one()
                    };
                    sign / (theta.abs() + (S::one() + theta * theta).sqrt())
                };
                let c = S::one() / (S::one() + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[[j, j]]
            .partial_cmp(&m[[i, i]])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut vecs = Array2::<S>::zeros((n, n));
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vecs[[r, new_col]] = v[[r, old_col]];
        }
    }
    (vals, vecs)
}

/// `(A + Aᵀ)/2`.
pub fn symmetrize<S: Real>(a: &ArrayView2<S>) -> Array2<S> {
    let n = a.nrows();
    let mut out = Array2::<S>::zeros((n, n));
    let half = real::<S>(0.5);
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] = (a[[i, j]] + a[[j, i]]) * half;
        }
    }
    out
}

/// Symmetric PSD square root via eigendecomposition.
///
/// Eigenvalues in `[clamp_floor, 0)` are clamped to zero; anything below
/// `clamp_floor` returns `None` (the matrix is not PSD to tolerance).
pub fn psd_sqrt<S: Real>(a: &ArrayView2<S>, clamp_floor: S) -> Option<Array2<S>> {
    let (vals, vecs) = symmetric_eigen(a);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (j, &lambda) in vals.iter().enumerate() {
        if lambda < clamp_floor {
            return None;
        }
        let root = lambda.max(S::zero()).sqrt();
        for i in 0..n {
            scaled[[i, j]] *= root;
        }
    }
    Some(scaled.dot(&vecs.t()))
}

/// Solves `A x = b` for symmetric positive-definite `A` via Cholesky.
///
/// Returns `None` when a pivot collapses (matrix not PD).
pub fn cholesky_solve<S: Real>(a: &ArrayView2<S>, b: &[S]) -> Option<Vec<S>> {
    let l = cholesky(a)?;
    let n = b.len();
    // forward: L y = b
    let mut y = vec![S::zero(); n];
    for i in 0..n {
        let mut acc = b[i];
        for j in 0..i {
            acc = acc - l[[i, j]] * y[j];
        }
        y[i] = acc / l[[i, i]];
    }
    // backward: Lᵀ x = y
    let mut x = vec![S::zero(); n];
    for i in (0..n).rev() {
        let mut acc = y[i];
        for j in i + 1..n {
            acc = acc - l[[j, i]] * x[j];
        }
        x[i] = acc / l[[i, i]];
    }
    Some(x)
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky<S: Real>(a: &ArrayView2<S>) -> Option<Array2<S>> {
    let n = a.nrows();
    let mut l = Array2::<S>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum = sum - l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= S::zero() {
                    return None;
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Log-determinant of a symmetric PD matrix from its Cholesky factor.
pub fn cholesky_logdet<S: Real>(l: &Array2<S>) -> S {
    let mut acc = S::zero();
    for i in 0..l.nrows() {
        acc += l[[i, i]].ln();
    }
    acc + acc
}

/// Orthonormal basis of the row space of `rows` (modified Gram-Schmidt with
/// one re-orthogonalization pass). Rows with residual norm below
/// `1e-10 × max input norm` are dropped as linearly dependent.
pub fn orthonormal_row_basis<S: Real>(rows: &ArrayView2<S>) -> Array2<S> {
    let d = rows.ncols();
    let mut basis: Vec<Vec<S>> = Vec::new();
    let max_norm = rows
        .rows()
        .into_iter()
        .map(|r| r.iter().fold(S::zero(), |a, &x| a + x * x).sqrt())
        .fold(S::zero(), |a, b| a.max(b));
    if max_norm == S::zero() {
        return Array2::zeros((0, d));
    }
    let drop_tol = max_norm * real(1e-10);

    for row in rows.rows() {
        let mut v: Vec<S> = row.to_vec();
        for _ in 0..2 {
            for b in &basis {
                let mut dot = S::zero();
                for k in 0..d {
                    dot += v[k] * b[k];
                }
                for k in 0..d {
                    v[k] = v[k] - dot * b[k];
                }
            }
        }
        let norm = v.iter().fold(S::zero(), |a, &x| a + x * x).sqrt();
        if norm > drop_tol {
            for x in v.iter_mut() {
                *x /= norm;
            }
            basis.push(v);
        }
    }

    let r = basis.len();
    let mut out = Array2::<S>::zeros((r, d));
    for (i, b) in basis.into_iter().enumerate() {
        for (j, x) in b.into_iter().enumerate() {
            out[[i, j]] = x;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn eigen_diagonal_matrix() {
        let a = array![[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]];
        let (vals, _) = symmetric_eigen(&a.view());
        assert_relative_eq!(vals[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(vals[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(vals[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eigen_reconstructs_input() {
        let a = array![
            [4.0, 1.0, 0.5, 0.0],
            [1.0, 3.0, 0.2, 0.1],
            [0.5, 0.2, 2.0, 0.3],
            [0.0, 0.1, 0.3, 1.0]
        ];
        let (vals, vecs) = symmetric_eigen(&a.view());
        let mut lam = Array2::<f64>::zeros((4, 4));
        for i in 0..4 {
            lam[[i, i]] = vals[i];
        }
        let recon = vecs.dot(&lam).dot(&vecs.t());
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(recon[[i, j]], a[[i, j]], epsilon = 1e-12);
            }
        }
        // eigenvector orthonormality
        let gram = vecs.t().dot(&vecs);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(gram[[i, j]], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn eigen_known_2x2() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1.
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, _) = symmetric_eigen(&a.view());
        assert_relative_eq!(vals[0], 3.0, epsilon = 1e-13);
        assert_relative_eq!(vals[1], 1.0, epsilon = 1e-13);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let a = array![[4.0, 1.0], [1.0, 9.0]];
        let s = psd_sqrt(&a.view(), -1e-8).unwrap();
        let sq = s.dot(&s);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(sq[[i, j]], a[[i, j]], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn psd_sqrt_rejects_indefinite() {
        let a = array![[1.0, 0.0], [0.0, -1.0]];
        assert!(psd_sqrt(&a.view(), -1e-8).is_none());
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = array![[4.0, 2.0], [2.0, 3.0]];
        let x = cholesky_solve(&a.view(), &[8.0, 7.0]).unwrap();
        assert_relative_eq!(4.0 * x[0] + 2.0 * x[1], 8.0, epsilon = 1e-12);
        assert_relative_eq!(2.0 * x[0] + 3.0 * x[1], 7.0, epsilon = 1e-12);
    }

    #[test]
    fn gram_schmidt_basis_is_orthonormal_and_drops_dependents() {
        let rows = array![
            [1.0, 0.0, 0.0, 1.0],
            [2.0, 0.0, 0.0, 2.0], // dependent
            [0.0, 1.0, 1.0, 0.0],
        ];
        let q = orthonormal_row_basis(&rows.view());
        assert_eq!(q.nrows(), 2);
        let gram = q.dot(&q.t());
        assert_relative_eq!(gram[[0, 0]], 1.0, epsilon = 1e-12);
        assert_relative_eq!(gram[[1, 1]], 1.0, epsilon = 1e-12);
        assert_relative_eq!(gram[[0, 1]], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn eigen_f32_works() {
        let a = array![[2.0f32, 1.0], [1.0, 2.0]];
        let (vals, _) = symmetric_eigen(&a.view());
        assert!((vals[0] - 3.0).abs() < 1e-5);
        assert!((vals[1] - 1.0).abs() < 1e-5);
    }
}
