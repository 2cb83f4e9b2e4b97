use crate::error::Result;
use crate::linalg::cholesky;
use crate::matrix::SymMatrix;

/// Off-diagonal magnitudes at or below this count as zero when reading a graph
/// off a precision matrix.
pub const DEFAULT_EDGE_TOL: f64 = 1e-8;

/// A positive definite precision matrix and the graph it encodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionEstimate {
    matrix: SymMatrix,
    edges: Vec<(usize, usize)>,
    edge_tol: f64,
}

impl PrecisionEstimate {
    /// Checks positive definiteness and extracts the edge set.
    pub fn new(matrix: SymMatrix, edge_tol: f64) -> Result<Self> {
        cholesky(matrix.as_matrix())?;
        Ok(Self::new_unchecked(matrix, edge_tol))
    }

    pub(crate) fn new_unchecked(matrix: SymMatrix, edge_tol: f64) -> Self {
        let edges = matrix.off_diagonal_support(edge_tol);
        PrecisionEstimate { matrix, edges, edge_tol }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    /// Edges `(i, j)`, `i < j`, 0-based, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_tol(&self) -> f64 {
        self.edge_tol
    }

    pub fn into_matrix(self) -> SymMatrix {
        self.matrix
    }

    /// `D Θ D` for positive diagonal `D`. The zero pattern is preserved, so
    /// the edge set is carried over rather than re-thresholded.
    pub fn congruence_diag(&self, d: &[f64]) -> PrecisionEstimate {
        PrecisionEstimate {
            matrix: self.matrix.congruence_diag(d),
            edges: self.edges.clone(),
            edge_tol: self.edge_tol,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_indefinite_and_reads_edges() {
        let bad = SymMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(PrecisionEstimate::new(bad, DEFAULT_EDGE_TOL).is_err());
        let ok = SymMatrix::from_rows(&[&[2.0, -0.5, 1e-12], &[-0.5, 2.0, 0.0], &[1e-12, 0.0, 2.0]]).unwrap();
        let est = PrecisionEstimate::new(ok, DEFAULT_EDGE_TOL).unwrap();
        assert_eq!(est.edges(), &[(0, 1)]);
        assert_eq!(est.congruence_diag(&[2.0, 3.0, 0.5]).edges(), &[(0, 1)]);
    }
}
