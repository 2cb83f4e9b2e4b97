//! CLIME: columnwise constrained ℓ1 minimization for inverse correlation
//! matrices, followed by min-magnitude symmetrization.
//!
//! Column `j` solves
//!
//! ```text
//! min |θ|_1   subject to   |Γ̂θ - e_j|_∞ <= λ
//! ```
//!
//! The linear program is handled through its dual,
//! `max e_jᵀy - λ|y|_1  s.t.  |Γ̂y|_∞ <= 1`, written with `y = y⁺ - y⁻` so the
//! origin is a feasible basis. A dense tableau simplex runs to optimality and
//! `θ` is read off the optimal multipliers of the `±Γ̂y <= 1` rows.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::correlation::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, spd_inverse};
use crate::matrix::SymMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ClimeOptions {
    /// Allowed violation of `|Γ̂Θ̃ - I|_max <= λ` in the post-hoc check.
    pub feas_tol: f64,
    /// Shift added beyond `|λ_min|` when repairing an indefinite estimate.
    pub pd_eps: f64,
    /// Pivot tolerance inside the simplex.
    pub pivot_tol: f64,
}

impl Default for ClimeOptions {
    fn default() -> Self {
        ClimeOptions {
            feas_tol: 1e-6,
            pd_eps: 1e-6,
            pivot_tol: 1e-11,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClimeSolution {
    /// Column solutions `Θ̃`, in general not symmetric.
    pub theta_raw: DMatrix<f64>,
    /// Min-magnitude symmetrization of `theta_raw`.
    pub theta_sym: SymMatrix,
    /// `|Γ̂Θ̃ - I|_max`, computed against the input correlation.
    pub feasibility_residual: f64,
    /// `|θ̃^j|_1` per column.
    pub column_objectives: Vec<f64>,
    pub is_pd: bool,
    /// Set when `theta_sym` is exactly zero (always the case for `λ >= 1`).
    pub degenerate: bool,
}

/// `θ̂_ij = θ̃_ij` if `|θ̃_ij| <= |θ̃_ji|`, else `θ̃_ji`. Ties keep `θ̃_ij` for
/// `i < j`, so the upper triangle wins when magnitudes are equal.
pub fn symmetrize_min(raw: &DMatrix<f64>) -> Result<SymMatrix> {
    if raw.nrows() != raw.ncols() {
        return Err(Error::DimensionMismatch("symmetrize_min needs a square matrix".into()));
    }
    Ok(SymMatrix::from_upper_fn(raw.nrows(), |i, j| {
        let (a, b) = (raw[(i, j)], raw[(j, i)]);
        if a.abs() <= b.abs() {
            a
        } else {
            b
        }
    }))
}

pub fn clime(gamma: &CorrelationMatrix, lambda: f64, opts: &ClimeOptions) -> Result<ClimeSolution> {
    clime_sym(gamma.as_sym(), lambda, opts)
}

pub fn clime_sym(gamma: &SymMatrix, lambda: f64, opts: &ClimeOptions) -> Result<ClimeSolution> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("clime penalty must be positive, got {lambda}")));
    }
    if lambda >= 1.0 {
        log::warn!("clime penalty {lambda} >= 1 makes the zero matrix feasible");
    }
    let p = gamma.dim();
    let columns: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|j| solve_column(gamma.as_matrix(), j, lambda, opts.pivot_tol))
        .collect::<Result<_>>()?;
    let theta_raw = DMatrix::from_fn(p, p, |i, j| columns[j][i]);
    let column_objectives = columns.iter().map(|c| c.iter().map(|v| v.abs()).sum()).collect();

    let mut residual = gamma.as_matrix() * &theta_raw;
    for i in 0..p {
        residual[(i, i)] -= 1.0;
    }
    let feasibility_residual = residual.amax();
    if feasibility_residual > lambda + opts.feas_tol {
        return Err(Error::NotConverged {
            iterations: 0,
            residual: feasibility_residual - lambda,
        });
    }
    let theta_sym = symmetrize_min(&theta_raw)?;
    let degenerate = theta_sym.as_matrix().iter().all(|v| *v == 0.0);
    if degenerate {
        log::warn!("clime estimate is identically zero at penalty {lambda}");
    }
    let is_pd = crate::linalg::cholesky(theta_sym.as_matrix()).is_ok();
    Ok(ClimeSolution {
        theta_raw,
        theta_sym,
        feasibility_residual,
        column_objectives,
        is_pd,
        degenerate,
    })
}

/// Inverse of the symmetrized CLIME estimate.
#[derive(Debug, Clone)]
pub struct ClimeInverse {
    pub correlation: SymMatrix,
    /// Positive definite precision actually inverted (shifted if repaired).
    pub precision: SymMatrix,
    pub repaired: bool,
    pub shift: f64,
}

/// `Θ̂_clime⁻¹`. An indefinite `Θ̂_clime` is shifted by
/// `(|λ_min| + pd_eps) I` before inversion and flagged.
pub fn invert_to_correlation(sol: &ClimeSolution, opts: &ClimeOptions) -> Result<ClimeInverse> {
    match spd_inverse(&sol.theta_sym) {
        Ok(correlation) => Ok(ClimeInverse {
            correlation,
            precision: sol.theta_sym.clone(),
            repaired: false,
            shift: 0.0,
        }),
        Err(Error::NotPd) => {
            let min = eigenvalues(&sol.theta_sym)[0];
            let shift = min.abs() + opts.pd_eps;
            log::warn!("clime estimate is not positive definite (min eigenvalue {min:e}); shifting by {shift:e}");
            let p = sol.theta_sym.dim();
            let precision = SymMatrix::symmetrized(sol.theta_sym.as_matrix() + DMatrix::identity(p, p) * shift);
            let correlation = spd_inverse(&precision)?;
            Ok(ClimeInverse {
                correlation,
                precision,
                repaired: true,
                shift,
            })
        }
        Err(e) => Err(e),
    }
}

/// One CLIME column by tableau simplex on the dual LP.
fn solve_column(gamma: &DMatrix<f64>, col: usize, lambda: f64, tol: f64) -> Result<Vec<f64>> {
    let p = gamma.nrows();
    let rows = 2 * p;
    let nx = 2 * p;
    let width = nx + rows + 1;
    let rhs = width - 1;

    // Rows: [Γ, -Γ] y <= 1 then [-Γ, Γ] y <= 1, slacks on the identity.
    let mut t = vec![0.0; rows * width];
    for i in 0..p {
        for k in 0..p {
            let g = gamma[(i, k)];
            t[i * width + k] = g;
            t[i * width + p + k] = -g;
            t[(p + i) * width + k] = -g;
            t[(p + i) * width + p + k] = g;
        }
    }
    for r in 0..rows {
        t[r * width + nx + r] = 1.0;
        t[r * width + rhs] = 1.0;
    }
    // Reduced costs for maximization.
    let mut reduced = vec![0.0; width - 1];
    for k in 0..p {
        let e = if k == col { 1.0 } else { 0.0 };
        reduced[k] = e - lambda;
        reduced[p + k] = -e - lambda;
    }
    let mut basis: Vec<usize> = (nx..nx + rows).collect();

    let max_pivots = 50 * (rows + nx);
    let mut stalled = 0usize;
    let mut pivots = 0usize;
    loop {
        // Dantzig pricing; Bland after a run of degenerate pivots.
        let entering = if stalled > 2 * rows {
            reduced.iter().position(|&r| r > tol)
        } else {
            let mut best = None;
            let mut best_val = tol;
            for (k, &r) in reduced.iter().enumerate() {
                if r > best_val {
                    best_val = r;
                    best = Some(k);
                }
            }
            best
        };
        let Some(e) = entering else { break };

        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for r in 0..rows {
            let a = t[r * width + e];
            if a > tol {
                let ratio = t[r * width + rhs] / a;
                let better = match leave {
                    None => true,
                    Some(l) => ratio < best_ratio - 1e-14 || (ratio <= best_ratio + 1e-14 && basis[r] < basis[l]),
                };
                if better {
                    best_ratio = ratio;
                    leave = Some(r);
                }
            }
        }
        let Some(l) = leave else {
            return Err(Error::ColumnInfeasible { column: col });
        };
        if best_ratio <= 1e-14 {
            stalled += 1;
        } else {
            stalled = 0;
        }

        let piv = t[l * width + e];
        for v in &mut t[l * width..(l + 1) * width] {
            *v /= piv;
        }
        let pivot_row: Vec<f64> = t[l * width..(l + 1) * width].to_vec();
        for r in 0..rows {
            if r == l {
                continue;
            }
            let factor = t[r * width + e];
            if factor != 0.0 {
                let row = &mut t[r * width..(r + 1) * width];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                row[e] = 0.0;
            }
        }
        let factor = reduced[e];
        for (v, pv) in reduced.iter_mut().zip(&pivot_row) {
            *v -= factor * pv;
        }
        reduced[e] = 0.0;
        basis[l] = e;

        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::ColumnNotConverged {
                column: col,
                iterations: pivots,
            });
        }
    }

    // Multipliers of the constraint rows: w_r = -reduced cost of slack r.
    let w: Vec<f64> = (0..rows).map(|r| (-reduced[nx + r]).max(0.0)).collect();
    Ok((0..p).map(|i| w[i] - w[p + i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn corr(rows: &[&[f64]]) -> CorrelationMatrix {
        CorrelationMatrix::new(SymMatrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn symmetrize_examples() {
        let raw = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.6, 1.0]);
        assert_eq!(symmetrize_min(&raw).unwrap().as_matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]));
        let tie = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 0.5, 1.0]);
        assert_eq!(symmetrize_min(&tie).unwrap().get(0, 1), -0.5);
        let sym = DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 3.0]);
        assert_eq!(symmetrize_min(&sym).unwrap().as_matrix(), &sym);
        assert!(symmetrize_min(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn identity_input_shrinks_diagonal() {
        for lambda in [0.05, 0.3, 0.9] {
            let sol = clime(&CorrelationMatrix::identity(4), lambda, &ClimeOptions::default()).unwrap();
            assert_relative_eq!(sol.theta_sym.as_matrix(), &(DMatrix::identity(4, 4) * (1.0 - lambda)), epsilon = 1e-12);
            assert!(!sol.degenerate);
        }
    }

    #[test]
    fn large_penalty_gives_zero() {
        let g = corr(&[&[1.0, 0.4, 0.1], &[0.4, 1.0, -0.3], &[0.1, -0.3, 1.0]]);
        let sol = clime(&g, 1.0, &ClimeOptions::default()).unwrap();
        assert!(sol.degenerate);
        assert!(!sol.is_pd);
        assert!(sol.theta_raw.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_non_positive_penalty() {
        assert!(clime(&CorrelationMatrix::identity(2), 0.0, &ClimeOptions::default()).is_err());
    }

    #[test]
    fn infeasible_singular_column_is_reported() {
        let g = corr(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(
            clime(&g, 0.1, &ClimeOptions::default()),
            Err(Error::ColumnInfeasible { .. })
        ));
    }

    #[test]
    fn inverse_of_diagonal_and_repair() {
        let opts = ClimeOptions::default();
        let sol = |m: DMatrix<f64>| ClimeSolution {
            theta_sym: symmetrize_min(&m).unwrap(),
            theta_raw: m,
            feasibility_residual: 0.0,
            column_objectives: vec![],
            is_pd: false,
            degenerate: false,
        };
        let inv = invert_to_correlation(&sol(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 4.0]))), &opts).unwrap();
        assert_relative_eq!(inv.correlation.get(0, 0), 0.5);
        assert_relative_eq!(inv.correlation.get(1, 1), 0.25);
        assert!(!inv.repaired);

        // Both off-diagonal candidates are large, so the symmetrized matrix
        // [[1, 2], [2, 1]] is indefinite.
        let raw = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 5.0, 1.0]);
        let inv = invert_to_correlation(&sol(raw), &opts).unwrap();
        assert!(inv.repaired);
        assert_relative_eq!(inv.shift, 1.0 + 1e-6, epsilon = 1e-12);
        assert!(crate::linalg::cholesky(inv.correlation.as_matrix()).is_ok());
    }
}
