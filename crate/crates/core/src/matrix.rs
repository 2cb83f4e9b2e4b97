//! Dense symmetric matrices and replicate data sets.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative asymmetry accepted by [`SymMatrix::new`] before the input is
/// rejected. Anything below it is averaged away.
const SYMMETRY_TOL: f64 = 1e-9;

/// A dense symmetric matrix. Storage is kept exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Wraps `m`, averaging `m` with its transpose so that the stored entries
    /// are exactly symmetric. Fails if `m` is not square, is empty, or is
    /// visibly asymmetric.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::DimensionMismatch("empty matrix".into()));
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let mut asym = 0.0f64;
        for j in 0..m.ncols() {
            for i in 0..j {
                asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        Ok(Self::symmetrized(m))
    }

    /// Builds a symmetric matrix from any square matrix by averaging it with
    /// its transpose. No tolerance check.
    pub fn symmetrized(mut m: DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "symmetrized needs a square matrix");
        let p = m.nrows();
        for j in 0..p {
            for i in 0..j {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    /// `f(i, j)` is evaluated for `i <= j` only and mirrored.
    pub fn from_upper_fn(p: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(p, p);
        for j in 0..p {
            for i in 0..=j {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    pub fn identity(p: usize) -> Self {
        SymMatrix(DMatrix::identity(p, p))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let p = d.len();
        SymMatrix(DMatrix::from_fn(p, p, |i, j| if i == j { d[i] } else { 0.0 }))
    }

    /// Row-major nested rows; used heavily in tests.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let p = rows.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::DimensionMismatch("rows of unequal length".into()));
        }
        Self::new(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, c: f64) -> Self {
        SymMatrix(&self.0 * c)
    }

    /// `D S D` for a positive diagonal `D = diag(d)`.
    pub fn congruence_diag(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.dim());
        let p = self.dim();
        SymMatrix(DMatrix::from_fn(p, p, |i, j| d[i] * self.0[(i, j)] * d[j]))
    }

    /// Entries `(i, j)` with `i < j` and `|s_ij| > tol`.
    pub fn off_diagonal_support(&self, tol: f64) -> Vec<(usize, usize)> {
        let p = self.dim();
        let mut edges = Vec::new();
        for i in 0..p {
            for j in (i + 1)..p {
                if self.0[(i, j)].abs() > tol {
                    edges.push((i, j));
                }
            }
        }
        edges
    }

    /// Simultaneous row/column permutation: `out[i][j] = self[perm[i]][perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let p = self.dim();
        assert_eq!(perm.len(), p);
        SymMatrix(DMatrix::from_fn(p, p, |i, j| self.0[(perm[i], perm[j])]))
    }
}

impl AsRef<DMatrix<f64>> for SymMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// `n` replicate `f x m` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    f: usize,
    m: usize,
    replicates: Vec<DMatrix<f64>>,
}

impl DataSet {
    pub fn new(replicates: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = replicates
            .first()
            .ok_or_else(|| Error::InvalidParameter("a data set needs at least one replicate".into()))?;
        let (f, m) = first.shape();
        if f == 0 || m == 0 {
            return Err(Error::DimensionMismatch("replicates must be non-empty".into()));
        }
        if let Some((t, x)) = replicates.iter().enumerate().find(|(_, x)| x.shape() != (f, m)) {
            return Err(Error::DimensionMismatch(format!(
                "replicate {t} is {}x{}, expected {f}x{m}",
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(DataSet { f, m, replicates })
    }

    /// Rows per replicate.
    pub fn f(&self) -> usize {
        self.f
    }

    /// Columns per replicate.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Replicate count.
    pub fn n(&self) -> usize {
        self.replicates.len()
    }

    pub fn replicates(&self) -> &[DMatrix<f64>] {
        &self.replicates
    }

    pub fn transposed(&self) -> DataSet {
        DataSet {
            f: self.m,
            m: self.f,
            replicates: self.replicates.iter().map(|x| x.transpose()).collect(),
        }
    }

    /// Keeps the listed rows of every replicate, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<DataSet> {
        if rows.is_empty() {
            return Err(Error::InvalidParameter("empty row selection".into()));
        }
        DataSet::new(self.replicates.iter().map(|x| x.select_rows(rows)).collect())
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<DataSet> {
        if cols.is_empty() {
            return Err(Error::InvalidParameter("empty column selection".into()));
        }
        DataSet::new(self.replicates.iter().map(|x| x.select_columns(cols)).collect())
    }

    pub fn map_replicates(&self, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Result<DataSet> {
        DataSet::new(self.replicates.iter().map(f).collect())
    }
}
