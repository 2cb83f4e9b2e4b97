//! Pooled sample correlations and weight matrices.
//!
//! For replicates `X(1..n)` of size `f x m` the column correlation is
//!
//! ```text
//! Γ̂_ij(A) = Σ_t <x(t)^i, x(t)^j> / sqrt(Σ_t |x(t)^i|² · Σ_t |x(t)^j|²)
//! ```
//!
//! with the row correlation `Γ̂(B)` defined the same way on rows. The weights
//! `w1[i] = sqrt((1/n) Σ_t |x(t)^i|²)` and `w2[j]` recover the scale removed by
//! the normalization.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DataSet, SymMatrix};

const UNIT_DIAG_TOL: f64 = 1e-12;

/// Symmetric matrix with exact unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix(SymMatrix);

impl CorrelationMatrix {
    /// Validates the unit diagonal (within 1e-12, then set exactly) and the
    /// `|r_ij| <= 1` bound.
    pub fn new(s: SymMatrix) -> Result<Self> {
        let p = s.dim();
        let mut m = s.into_inner();
        for i in 0..p {
            if (m[(i, i)] - 1.0).abs() > UNIT_DIAG_TOL {
                return Err(Error::InvalidParameter(format!(
                    "correlation diagonal entry {i} is {}",
                    m[(i, i)]
                )));
            }
            m[(i, i)] = 1.0;
        }
        if m.iter().any(|v| !v.is_finite() || v.abs() > 1.0 + UNIT_DIAG_TOL) {
            return Err(Error::InvalidParameter("correlation entry outside [-1, 1]".into()));
        }
        Ok(CorrelationMatrix(SymMatrix::symmetrized(m)))
    }

    pub fn identity(p: usize) -> Self {
        CorrelationMatrix(SymMatrix::identity(p))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.0
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        self.0.as_matrix()
    }

    pub fn into_sym(self) -> SymMatrix {
        self.0
    }

    /// `max_{i != j} |r_ij|`.
    pub fn max_off_diagonal(&self) -> f64 {
        let p = self.dim();
        let mut best = 0.0f64;
        for j in 0..p {
            for i in 0..j {
                best = best.max(self.get(i, j).abs());
            }
        }
        best
    }
}

/// Diagonal weights and the mean squared Frobenius norm of the replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightPair {
    /// Column weights, length `m`.
    pub w1: Vec<f64>,
    /// Row weights, length `f`.
    pub w2: Vec<f64>,
    /// `(1/n) Σ_t |X(t)|_F²`.
    pub frob2_mean: f64,
}

/// `Σ_t X(t)ᵀ X(t)`, accumulated in replicate order.
pub fn column_gram(data: &DataSet) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(data.m(), data.m());
    for x in data.replicates() {
        g += x.tr_mul(x);
    }
    g
}

/// `Σ_t X(t) X(t)ᵀ`, accumulated in replicate order.
pub fn row_gram(data: &DataSet) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(data.f(), data.f());
    for x in data.replicates() {
        g += x * x.transpose();
    }
    g
}

/// Normalizes a Gram/covariance matrix to unit diagonal. The closure maps a
/// zero-diagonal index to the caller's error.
pub(crate) fn normalize_gram(g: &DMatrix<f64>, degenerate: impl Fn(usize) -> Error) -> Result<(CorrelationMatrix, Vec<f64>)> {
    let p = g.nrows();
    let mut scale = Vec::with_capacity(p);
    for i in 0..p {
        let d = g[(i, i)];
        if !(d > 0.0) {
            return Err(degenerate(i));
        }
        scale.push(d.sqrt());
    }
    let mut r = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            (g[(i, j)] / scale[i] / scale[j]).clamp(-1.0, 1.0)
        }
    });
    for i in 0..p {
        r[(i, i)] = 1.0;
    }
    Ok((CorrelationMatrix(SymMatrix::symmetrized(r)), scale))
}

/// Sample column correlation `Γ̂(A)`, `m x m`.
pub fn column_correlation(data: &DataSet) -> Result<CorrelationMatrix> {
    normalize_gram(&column_gram(data), Error::DegenerateColumn).map(|(c, _)| c)
}

/// Sample row correlation `Γ̂(B)`, `f x f`.
pub fn row_correlation(data: &DataSet) -> Result<CorrelationMatrix> {
    normalize_gram(&row_gram(data), Error::DegenerateRow).map(|(c, _)| c)
}

/// Correlation form of a covariance matrix together with `sqrt(diag)`.
pub fn covariance_to_correlation(s: &SymMatrix) -> Result<(CorrelationMatrix, Vec<f64>)> {
    normalize_gram(s.as_matrix(), |i| {
        Error::InvalidParameter(format!("covariance has non-positive diagonal entry {i}"))
    })
}

pub fn weights(data: &DataSet) -> Result<WeightPair> {
    let n = data.n() as f64;
    let mut col = vec![0.0; data.m()];
    let mut row = vec![0.0; data.f()];
    let mut frob2 = 0.0;
    for x in data.replicates() {
        for j in 0..x.ncols() {
            for i in 0..x.nrows() {
                let v = x[(i, j)] * x[(i, j)];
                col[j] += v;
                row[i] += v;
            }
        }
        frob2 += x.norm_squared();
    }
    if let Some(i) = col.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateColumn(i));
    }
    if let Some(j) = row.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateRow(j));
    }
    Ok(WeightPair {
        w1: col.iter().map(|v| (v / n).sqrt()).collect(),
        w2: row.iter().map(|v| (v / n).sqrt()).collect(),
        frob2_mean: frob2 / n,
    })
}
