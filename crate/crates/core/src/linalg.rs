//! Dense linear algebra helpers: symmetric square root, Kronecker products,
//! Cholesky-based inversion and log-determinants.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;

/// Default limit on `m * f` for explicitly materialized Kronecker products.
pub const DEFAULT_KRONECKER_GUARD: usize = 4096;

/// Relative tolerance used by [`sym_sqrt`] for slightly negative eigenvalues.
pub const DEFAULT_EIG_TOL: f64 = 1e-8;

/// Unique positive semi-definite square root of `s`.
///
/// Eigenvalues below `-DEFAULT_EIG_TOL * ||s||_2` are rejected, the rest are
/// clamped at zero. The input is rescaled by an even power of two before the
/// eigendecomposition and the root by the matching power afterwards, so
/// `sym_sqrt(4^k * s) == 2^k * sym_sqrt(s)` holds bit for bit.
pub fn sym_sqrt(s: &SymMatrix) -> Result<SymMatrix> {
    sym_sqrt_with_tol(s, DEFAULT_EIG_TOL)
}

pub fn sym_sqrt_with_tol(s: &SymMatrix, tol_rel: f64) -> Result<SymMatrix> {
    let amax = s.as_matrix().amax();
    if amax == 0.0 {
        return Ok(s.clone());
    }
    let k = even_exponent(amax);
    let down = (2.0f64).powi(-k);
    let up = (2.0f64).powi(k / 2);
    let eig = SymmetricEigen::new(s.as_matrix() * down);
    let spectral = eig.eigenvalues.amax();
    let min = eig.eigenvalues.min();
    if min < -tol_rel * spectral {
        return Err(Error::NotPsd {
            min_eigenvalue: min / down,
        });
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    let mut scaled_q = q.clone();
    for (j, r) in roots.iter().enumerate() {
        scaled_q.column_mut(j).scale_mut(*r);
    }
    let root = scaled_q * q.transpose();
    Ok(SymMatrix::symmetrized(root * up))
}

/// Binary exponent of `x`, rounded down to an even number.
fn even_exponent(x: f64) -> i32 {
    let bits = x.to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i32;
    let e = if raw == 0 { -1022 } else { raw - 1023 };
    e - e.rem_euclid(2)
}

/// Kronecker product `A ⊗ B` under the column-stacking vec convention:
/// entry `(i*f + k, j*f + l)` equals `a[i][j] * b[k][l]` for `B` of size `f`.
pub fn kronecker(a: &SymMatrix, b: &SymMatrix) -> Result<SymMatrix> {
    kronecker_guarded(a, b, DEFAULT_KRONECKER_GUARD)
}

pub fn kronecker_guarded(a: &SymMatrix, b: &SymMatrix, guard: usize) -> Result<SymMatrix> {
    let rows = a.dim() * b.dim();
    if rows > guard {
        return Err(Error::DimensionGuard { rows, guard });
    }
    Ok(SymMatrix::symmetrized(a.as_matrix().kronecker(b.as_matrix())))
}

pub fn cholesky(s: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    Cholesky::new(s.clone()).ok_or(Error::NotPd)
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(s: &SymMatrix) -> Result<SymMatrix> {
    let chol = cholesky(s.as_matrix())?;
    Ok(SymMatrix::symmetrized(chol.inverse()))
}

/// `log |S|` for symmetric positive definite `S`.
pub fn log_det(s: &SymMatrix) -> Result<f64> {
    let chol = cholesky(s.as_matrix())?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().take(s.dim()).map(|v| v.ln()).sum::<f64>())
}

pub fn eigenvalues(s: &SymMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = s
        .as_matrix()
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

pub fn min_eigenvalue(s: &SymMatrix) -> f64 {
    eigenvalues(s)[0]
}

/// Largest singular value of a symmetric matrix.
pub fn operator_norm(s: &SymMatrix) -> f64 {
    let e = eigenvalues(s);
    e[0].abs().max(e[e.len() - 1].abs())
}

/// Entrywise max-norm of a (not necessarily symmetric) matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

/// `|M|_1`: sum of absolute entries.
pub fn l1_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.abs()).sum()
}

/// `|M|_{1,off}`: sum of absolute off-diagonal entries.
pub fn l1_off(m: &DMatrix<f64>) -> f64 {
    let diag: f64 = (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].abs()).sum();
    l1_norm(m) - diag
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sqrt_identity_and_diagonal() {
        let r = sym_sqrt(&SymMatrix::identity(3)).unwrap();
        assert_relative_eq!(r.as_matrix(), &DMatrix::identity(3, 3), epsilon = 1e-14);
        let r = sym_sqrt(&SymMatrix::from_diagonal(&[4.0, 9.0])).unwrap();
        assert_relative_eq!(r.get(0, 0), 2.0, epsilon = 1e-14);
        assert_relative_eq!(r.get(1, 1), 3.0, epsilon = 1e-14);
        assert!(r.get(0, 1).abs() < 1e-14);
    }

    #[test]
    fn sqrt_two_by_two_matches_hand_eigendecomposition() {
        // Eigenvectors (1,1)/√2 and (1,-1)/√2 with eigenvalues 3 and 1.
        let s = SymMatrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap();
        let (a, b) = (3f64.sqrt(), 1.0);
        let expected = DMatrix::from_row_slice(2, 2, &[(a + b) / 2.0, (a - b) / 2.0, (a - b) / 2.0, (a + b) / 2.0]);
        let r = sym_sqrt(&s).unwrap();
        assert_relative_eq!(r.as_matrix(), &expected, epsilon = 1e-13);
        let rr = r.as_matrix() * r.as_matrix();
        assert!((rr - s.as_matrix()).norm() <= 1e-10 * s.frobenius_norm());
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let s = SymMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(matches!(sym_sqrt(&s), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn sqrt_tolerates_round_off_negative_eigenvalue() {
        // Rank-one PSD matrix with a tiny negative perturbation.
        let s = SymMatrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0 - 1e-12]]).unwrap();
        let r = sym_sqrt(&s).unwrap();
        assert!(((r.as_matrix() * r.as_matrix()) - s.as_matrix()).norm() < 1e-6);
    }

    #[test]
    fn sqrt_scales_exactly_by_powers_of_four() {
        let s = SymMatrix::from_rows(&[&[1.3, 0.2, 0.1], &[0.2, 0.7, -0.3], &[0.1, -0.3, 2.2]]).unwrap();
        let r = sym_sqrt(&s).unwrap();
        let r4 = sym_sqrt(&s.scale(4.0)).unwrap();
        assert_eq!(r4.as_matrix(), &(r.as_matrix() * 2.0));
        let r16 = sym_sqrt(&s.scale(1.0 / 16.0)).unwrap();
        assert_eq!(r16.as_matrix(), &(r.as_matrix() * 0.25));
    }

    #[test]
    fn kronecker_examples() {
        let k = kronecker(&SymMatrix::identity(2), &SymMatrix::identity(3)).unwrap();
        assert_eq!(k.as_matrix(), &DMatrix::identity(6, 6));

        let a = SymMatrix::from_rows(&[&[1.0, 0.5], &[0.5, 1.0]]).unwrap();
        let k = kronecker(&a, &SymMatrix::from_diagonal(&[2.0])).unwrap();
        assert_eq!(k.as_matrix(), &DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));

        // Hand expansion: blocks I and 0.5 I.
        let k = kronecker(&a, &SymMatrix::identity(2)).unwrap();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(4, 4, &[
            1.0, 0.0, 0.5, 0.0,
            0.0, 1.0, 0.0, 0.5,
            0.5, 0.0, 1.0, 0.0,
            0.0, 0.5, 0.0, 1.0,
        ]);
        assert_eq!(k.as_matrix(), &expected);
    }

    #[test]
    fn kronecker_guard() {
        let a = SymMatrix::identity(70);
        let b = SymMatrix::identity(70);
        assert!(matches!(kronecker(&a, &b), Err(Error::DimensionGuard { .. })));
        assert!(kronecker_guarded(&a, &b, 4900).is_ok());
    }

    #[test]
    fn log_det_and_inverse() {
        let s = SymMatrix::from_diagonal(&[2.0, 2.0]);
        assert_relative_eq!(log_det(&s).unwrap(), 4f64.ln(), epsilon = 1e-14);
        let inv = spd_inverse(&s).unwrap();
        assert_relative_eq!(inv.get(0, 0), 0.5);
        let bad = SymMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(matches!(log_det(&bad), Err(Error::NotPd)));
    }
}
