#![allow(dead_code)]

use gemini_core::correlation::CorrelationMatrix;
use gemini_core::rng::RngSpec;
use gemini_core::SymMatrix;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// Random positive definite correlation matrix from a Wishart-like draw with
/// `extra` surplus degrees of freedom.
pub fn random_correlation(p: usize, extra: usize, seed: u64) -> CorrelationMatrix {
    let mut rng = RngSpec::new(seed).stream(0, 0);
    let g = DMatrix::from_fn(p, p + extra, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s = &g * g.transpose();
    let d: Vec<f64> = (0..p).map(|i| s[(i, i)].sqrt()).collect();
    let r = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { s[(i, j)] / (d[i] * d[j]) });
    CorrelationMatrix::new(SymMatrix::symmetrized(r)).unwrap()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Largest off-diagonal absolute difference.
pub fn max_off_diag_error(est: &DMatrix<f64>, truth: &DMatrix<f64>) -> f64 {
    let p = est.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                worst = worst.max((est[(i, j)] - truth[(i, j)]).abs());
            }
        }
    }
    worst
}
