//! Matrix-variate normal sampling, `X = B^{1/2} Z A^{1/2}`.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::sym_sqrt;
use crate::matrix::{DataSet, SymMatrix};
use crate::rng::RngSpec;

/// Zero-mean matrix normal `N_{f,m}(0, A ⊗ B)` with precomputed square roots.
#[derive(Debug, Clone)]
pub struct MatrixNormal {
    root_a: SymMatrix,
    root_b: SymMatrix,
}

impl MatrixNormal {
    /// `a` is the `m x m` column covariance, `b` the `f x f` row covariance.
    pub fn new(a: &SymMatrix, b: &SymMatrix) -> Result<Self> {
        Ok(MatrixNormal {
            root_a: sym_sqrt(a)?,
            root_b: sym_sqrt(b)?,
        })
    }

    pub fn m(&self) -> usize {
        self.root_a.dim()
    }

    pub fn f(&self) -> usize {
        self.root_b.dim()
    }

    /// Draws `n` replicates for `trial`; replicate `t` reads stream `(trial, t)`.
    pub fn sample(&self, n: usize, rng: &RngSpec, trial: u32) -> Result<DataSet> {
        if n == 0 {
            return Err(Error::InvalidParameter("replicate count must be at least 1".into()));
        }
        let replicates: Vec<DMatrix<f64>> = (0..n)
            .into_par_iter()
            .map(|t| {
                let z = standard_normal_matrix(self.f(), self.m(), rng, trial, t as u32);
                self.root_b.as_matrix() * z * self.root_a.as_matrix()
            })
            .collect();
        DataSet::new(replicates)
    }
}

/// `f x m` matrix of independent N(0, 1) draws, filled row by row.
pub fn standard_normal_matrix(f: usize, m: usize, rng: &RngSpec, trial: u32, replicate: u32) -> DMatrix<f64> {
    let mut stream = rng.stream(trial, replicate);
    let mut z = DMatrix::zeros(f, m);
    for i in 0..f {
        for j in 0..m {
            z[(i, j)] = StandardNormal.sample(&mut stream);
        }
    }
    z
}

/// One-shot sampler: `n` replicates from `N_{f,m}(0, A ⊗ B)`.
pub fn sample_matrix_normal(a: &SymMatrix, b: &SymMatrix, n: usize, rng: &RngSpec, trial: u32) -> Result<DataSet> {
    MatrixNormal::new(a, b)?.sample(n, rng, trial)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_covariances_give_standard_normal_entries() {
        let data = sample_matrix_normal(&SymMatrix::identity(100), &SymMatrix::identity(100), 1, &RngSpec::new(11), 0).unwrap();
        let x = &data.replicates()[0];
        let count = (x.nrows() * x.ncols()) as f64;
        let mean = x.sum() / count;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
        assert!(mean.abs() < 4.0 / count.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn deterministic_for_same_spec() {
        let a = SymMatrix::from_rows(&[&[1.0, 0.3], &[0.3, 1.0]]).unwrap();
        let b = SymMatrix::identity(3);
        let d1 = sample_matrix_normal(&a, &b, 4, &RngSpec::new(5), 2).unwrap();
        let d2 = sample_matrix_normal(&a, &b, 4, &RngSpec::new(5), 2).unwrap();
        assert_eq!(d1, d2);
        let d3 = sample_matrix_normal(&a, &b, 4, &RngSpec::new(5), 3).unwrap();
        assert_ne!(d1, d3);
    }

    #[test]
    fn rejects_indefinite_covariance_and_zero_replicates() {
        let bad = SymMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(matches!(
            sample_matrix_normal(&bad, &SymMatrix::identity(2), 1, &RngSpec::new(0), 0),
            Err(Error::NotPsd { .. })
        ));
        assert!(sample_matrix_normal(&SymMatrix::identity(2), &SymMatrix::identity(2), 0, &RngSpec::new(0), 0).is_err());
    }
}
