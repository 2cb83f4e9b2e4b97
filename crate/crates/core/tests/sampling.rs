mod common;

use common::max_abs_diff;
use gemini_core::correlation::{column_correlation, row_correlation, weights};
use gemini_core::linalg::{kronecker, min_eigenvalue, sym_sqrt};
use gemini_core::models::{ar1, random_concentration};
use gemini_core::rng::RngSpec;
use gemini_core::sampler::{sample_matrix_normal, MatrixNormal};
use gemini_core::{DataSet, SymMatrix};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Entrywise check of the empirical covariance of `vec(X)` (column stacking)
/// against `A ⊗ B`, in units of the Monte-Carlo standard error.
fn worst_z_score(data: &DataSet, target: &SymMatrix) -> f64 {
    let (f, m) = (data.f(), data.m());
    let d = f * m;
    let n = data.n() as f64;
    let mut sum = DMatrix::<f64>::zeros(d, d);
    let mut sum_sq = DMatrix::<f64>::zeros(d, d);
    for x in data.replicates() {
        let v: Vec<f64> = (0..d).map(|k| x[(k % f, k / f)]).collect();
        for a in 0..d {
            for b in 0..d {
                let p = v[a] * v[b];
                sum[(a, b)] += p;
                sum_sq[(a, b)] += p * p;
            }
        }
    }
    let mut worst: f64 = 0.0;
    for a in 0..d {
        for b in a..d {
            let mean = sum[(a, b)] / n;
            let var = sum_sq[(a, b)] / n - mean * mean;
            let se = (var / n).sqrt();
            worst = worst.max((mean - target.get(a, b)).abs() / se);
        }
    }
    worst
}

#[test]
fn vec_covariance_matches_kronecker_small() {
    let a = SymMatrix::from_rows(&[&[1.0, 0.4], &[0.4, 2.0]]).unwrap();
    let b = SymMatrix::from_rows(&[&[1.5, -0.3], &[-0.3, 0.8]]).unwrap();
    let data = sample_matrix_normal(&a, &b, 100_000, &RngSpec::new(2024), 0).unwrap();
    let z = worst_z_score(&data, &kronecker(&a, &b).unwrap());
    assert!(z <= 3.0, "worst z-score {z}");
}

#[test]
fn sampler_is_deterministic_across_thread_counts() {
    let a = ar1(6, 0.4).unwrap().covariance;
    let b = ar1(5, -0.2).unwrap().covariance;
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| sample_matrix_normal(&a, &b, 16, &RngSpec::new(9), 3).unwrap())
    };
    let one = run(1);
    let four = run(4);
    for (x, y) in one.replicates().iter().zip(four.replicates()) {
        assert_eq!(x, y);
    }
}

#[test]
fn scale_ambiguity_is_bitwise_for_powers_of_four() {
    let mut stream = RngSpec::new(5).stream(0, 0);
    let a = ar1(4, 0.6).unwrap().covariance;
    let b = random_concentration(3, 2, 0.1, 0.3, 0.25, &mut stream).unwrap().covariance;
    let base = sample_matrix_normal(&a, &b, 3, &RngSpec::new(1), 0).unwrap();
    for eta in [4.0, 16.0, 0.25] {
        let scaled = sample_matrix_normal(&a.scale(eta), &b.scale(1.0 / eta), 3, &RngSpec::new(1), 0).unwrap();
        assert_eq!(base.replicates(), scaled.replicates(), "η = {eta}");
    }
}

#[test]
fn scale_ambiguity_holds_to_round_off_for_other_factors() {
    let a = ar1(4, 0.6).unwrap().covariance;
    let b = ar1(3, 0.3).unwrap().covariance;
    let base = sample_matrix_normal(&a, &b, 2, &RngSpec::new(1), 0).unwrap();
    let scaled = sample_matrix_normal(&a.scale(3.7), &b.scale(1.0 / 3.7), 2, &RngSpec::new(1), 0).unwrap();
    for (x, y) in base.replicates().iter().zip(scaled.replicates()) {
        assert!(max_abs_diff(x, y) <= 1e-12);
    }
}

#[test]
fn sample_correlations_are_psd() {
    let sampler = MatrixNormal::new(&ar1(30, 0.5).unwrap().covariance, &ar1(10, 0.3).unwrap().covariance).unwrap();
    for trial in 0..5 {
        // Fewer rows than columns makes the column correlation rank deficient.
        let data = sampler.sample(1, &RngSpec::new(3), trial).unwrap();
        assert!(min_eigenvalue(column_correlation(&data).unwrap().as_sym()) >= -1e-10);
        assert!(min_eigenvalue(row_correlation(&data).unwrap().as_sym()) >= -1e-10);
    }
}

fn dataset_strategy() -> impl Strategy<Value = DataSet> {
    (1usize..4, 2usize..6, 2usize..6).prop_flat_map(|(n, f, m)| {
        proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, f * m), n).prop_map(move |reps| {
            DataSet::new(reps.into_iter().map(|v| DMatrix::from_row_slice(f, m, &v)).collect()).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sym_sqrt_squares_back(seed in 0u64..10_000, p in 1usize..40) {
        let mut rng = RngSpec::new(seed).stream(0, 0);
        let g = DMatrix::from_fn(p, p, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0));
        let s = SymMatrix::symmetrized(&g * g.transpose());
        let r = sym_sqrt(&s).unwrap();
        let back = r.as_matrix() * r.as_matrix();
        let scale = s.frobenius_norm().max(1e-300);
        prop_assert!((back - s.as_matrix()).norm() / scale <= 1e-9);
        prop_assert!(min_eigenvalue(&r) >= -1e-10 * scale);
    }

    #[test]
    fn weight_identities_hold(data in dataset_strategy()) {
        prop_assume!(column_correlation(&data).is_ok() && row_correlation(&data).is_ok());
        let w = weights(&data).unwrap();
        let s1: f64 = w.w1.iter().map(|v| v * v).sum();
        let s2: f64 = w.w2.iter().map(|v| v * v).sum();
        prop_assert!((s1 - w.frob2_mean).abs() <= 1e-12 * w.frob2_mean);
        prop_assert!((s2 - w.frob2_mean).abs() <= 1e-12 * w.frob2_mean);
    }

    #[test]
    fn single_replicate_gram_identity(data in dataset_strategy()) {
        prop_assume!(data.n() == 1);
        prop_assume!(column_correlation(&data).is_ok() && row_correlation(&data).is_ok());
        let x = &data.replicates()[0];
        let w = weights(&data).unwrap();
        let inv1 = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(w.w1.len(), w.w1.iter().map(|v| 1.0 / v)));
        let inv2 = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(w.w2.len(), w.w2.iter().map(|v| 1.0 / v)));
        let ga = &inv1 * x.transpose() * x * &inv1;
        let gb = &inv2 * x * x.transpose() * &inv2;
        let ca = column_correlation(&data).unwrap();
        let cb = row_correlation(&data).unwrap();
        for i in 0..data.m() {
            for j in 0..data.m() {
                let expect = if i == j { 1.0 } else { ga[(i, j)] };
                prop_assert!((ca.get(i, j) - expect).abs() <= 1e-12);
            }
        }
        for i in 0..data.f() {
            for j in 0..data.f() {
                let expect = if i == j { 1.0 } else { gb[(i, j)] };
                prop_assert!((cb.get(i, j) - expect).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn correlations_are_bounded(data in dataset_strategy()) {
        prop_assume!(column_correlation(&data).is_ok());
        let c = column_correlation(&data).unwrap();
        for i in 0..c.dim() {
            prop_assert_eq!(c.get(i, i), 1.0);
            for j in 0..c.dim() {
                prop_assert!(c.get(i, j).abs() <= 1.0 + 1e-12);
            }
        }
    }
}
