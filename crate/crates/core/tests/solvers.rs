mod common;

use common::{max_abs_diff, random_correlation};
use gemini_core::clime::{clime, symmetrize_min, ClimeOptions};
use gemini_core::correlation::CorrelationMatrix;
use gemini_core::glasso::{glasso, glasso_objective, kkt_residual, GlassoInit, GlassoOptions};
use gemini_core::SymMatrix;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn corr(rows: &[&[f64]]) -> CorrelationMatrix {
    CorrelationMatrix::new(SymMatrix::from_rows(rows).unwrap()).unwrap()
}

/// Exhaustive LP oracle for `min |θ|_1 s.t. |Γθ - e_j|_∞ <= λ`.
///
/// The objective is linear on each orthant, so an optimum sits at a point where
/// `p` independent constraints are tight, drawn from the `2p` box faces and the
/// `p` coordinate planes. Every such choice is tried.
fn lp_oracle(gamma: &DMatrix<f64>, j: usize, lambda: f64) -> f64 {
    let p = gamma.nrows();
    // Constraint k: row a_k, right side b_k, read as a_k·θ = b_k when tight.
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for i in 0..p {
        let e = if i == j { 1.0 } else { 0.0 };
        rows.push((gamma.row(i).transpose(), e + lambda));
        rows.push((gamma.row(i).transpose(), e - lambda));
    }
    for i in 0..p {
        let mut a = DVector::zeros(p);
        a[i] = 1.0;
        rows.push((a, 0.0));
    }
    let feasible = |theta: &DVector<f64>| {
        let r = gamma * theta;
        (0..p).all(|i| {
            let e = if i == j { 1.0 } else { 0.0 };
            (r[i] - e).abs() <= lambda + 1e-9
        })
    };
    let mut best = f64::INFINITY;
    let mut pick: Vec<usize> = (0..p).collect();
    loop {
        let a = DMatrix::from_fn(p, p, |r, c| rows[pick[r]].0[c]);
        let b = DVector::from_fn(p, |r, _| rows[pick[r]].1);
        if let Some(theta) = a.clone().lu().solve(&b) {
            if a.clone().svd(false, false).singular_values.min() > 1e-10 && feasible(&theta) {
                best = best.min(theta.abs().sum());
            }
        }
        // Next combination of p indices out of rows.len().
        let n = rows.len();
        let mut k = p;
        while k > 0 && pick[k - 1] == n - p + k - 1 {
            k -= 1;
        }
        if k == 0 {
            break;
        }
        pick[k - 1] += 1;
        for t in k..p {
            pick[t] = pick[t - 1] + 1;
        }
    }
    best
}

#[test]
fn clime_columns_match_lp_oracle() {
    let mut cases: Vec<(CorrelationMatrix, f64)> = Vec::new();
    for seed in 0..6 {
        for &lambda in &[0.05, 0.2] {
            cases.push((random_correlation(3, 2, seed), lambda));
        }
    }
    for seed in 100..103 {
        for &lambda in &[0.05, 0.2] {
            cases.push((random_correlation(6, 3, seed), lambda));
        }
    }
    for (gamma, lambda) in &cases {
        let sol = clime(gamma, *lambda, &ClimeOptions::default()).unwrap();
        assert!(sol.feasibility_residual <= lambda + 1e-6);
        for j in 0..gamma.dim() {
            let oracle = lp_oracle(gamma.as_matrix(), j, *lambda);
            let got = sol.theta_raw.column(j).abs().sum();
            assert!((got - oracle).abs() <= 1e-4, "column {j}: {got} vs {oracle}");
            assert!((sol.column_objectives[j] - oracle).abs() <= 1e-4);
        }
        assert_eq!(sol.theta_sym, symmetrize_min(&sol.theta_raw).unwrap());
    }
}

#[test]
fn clime_two_by_two_matches_oracle_entries() {
    let gamma = corr(&[&[1.0, 0.5], &[0.5, 1.0]]);
    let sol = clime(&gamma, 0.1, &ClimeOptions::default()).unwrap();
    for j in 0..2 {
        let oracle = lp_oracle(gamma.as_matrix(), j, 0.1);
        assert!((sol.theta_raw.column(j).abs().sum() - oracle).abs() <= 1e-4);
    }
    // Both columns are mirror images, so the symmetrized matrix is the raw one.
    let s = sol.theta_sym.as_matrix();
    assert!((s[(0, 1)] - sol.theta_raw[(0, 1)]).abs() <= 1e-12);
    assert!((s[(0, 1)] - s[(1, 0)]).abs() == 0.0);
}

#[test]
fn clime_l1_norm_shrinks_with_lambda() {
    let gamma = random_correlation(8, 4, 7);
    let mut last = f64::INFINITY;
    for &lambda in &[0.02, 0.05, 0.1, 0.2, 0.4] {
        let sol = clime(&gamma, lambda, &ClimeOptions::default()).unwrap();
        let l1: f64 = sol.column_objectives.iter().sum();
        assert!(l1 <= last + 1e-8, "{l1} > {last} at λ = {lambda}");
        assert!(sol.feasibility_residual <= lambda + 1e-6);
        last = l1;
    }
}

#[test]
fn glasso_random_inputs_satisfy_optimality() {
    for (k, &p) in [5usize, 12, 30].iter().enumerate() {
        for (l, &lambda) in [0.01, 0.1, 0.3].iter().enumerate() {
            let gamma = random_correlation(p, p / 2 + 1, (10 * k + l) as u64);
            let sol = glasso(&gamma, lambda, &GlassoOptions::default()).unwrap();
            assert!(sol.kkt_residual <= 1e-6);
            let recomputed = kkt_residual(gamma.as_sym(), sol.theta.matrix(), lambda).unwrap();
            assert!(recomputed <= 1e-6);
            for w in sol.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
            }
            let w = sol.w.as_matrix();
            for i in 0..p {
                assert!((w[(i, i)] - 1.0).abs() <= 1e-8);
                for j in 0..p {
                    if i != j {
                        assert!((w[(i, j)] - gamma.get(i, j)).abs() <= lambda + 1e-6);
                    }
                }
            }
        }
    }
}

#[test]
fn glasso_agrees_from_two_starting_points() {
    for seed in 0..4 {
        let gamma = random_correlation(15, 5, 40 + seed);
        let lambda = 0.1;
        let a = glasso(&gamma, lambda, &GlassoOptions::default()).unwrap();
        let opts = GlassoOptions { init: GlassoInit::RidgeInverse, ..Default::default() };
        let b = glasso(&gamma, lambda, &opts).unwrap();
        let diff = max_abs_diff(a.theta.matrix().as_matrix(), b.theta.matrix().as_matrix());
        assert!(diff <= 10.0 * 1e-6, "{diff}");
    }
}

#[test]
fn glasso_full_penalty_is_identity_on_random_inputs() {
    for seed in 0..5 {
        let gamma = random_correlation(10, 3, 70 + seed);
        let lambda = gamma.max_off_diagonal();
        let sol = glasso(&gamma, lambda, &GlassoOptions::default()).unwrap();
        assert!(sol.theta.edges().is_empty());
        assert!(max_abs_diff(sol.theta.matrix().as_matrix(), &DMatrix::identity(10, 10)) <= 1e-12);
    }
}

#[test]
fn glasso_two_by_two_closed_form_over_a_range() {
    for &r in &[-0.8, -0.3, 0.05, 0.5, 0.9] {
        for &lambda in &[0.0, 0.02, 0.1, 0.4, 1.0] {
            let gamma = corr(&[&[1.0, r], &[r, 1.0]]);
            let opts = GlassoOptions { kkt_tol: 1e-10, ..Default::default() };
            let sol = glasso(&gamma, lambda, &opts).unwrap();
            assert!(sol.kkt_residual <= 1e-10);
            let expect = r.signum() * (r.abs() - lambda).max(0.0);
            assert!((sol.w.get(0, 1) - expect).abs() <= 1e-8, "r = {r}, λ = {lambda}: {} vs {expect}, {} sweeps", sol.w.get(0, 1), sol.iterations);
        }
    }
}

#[test]
fn glasso_solution_beats_identity_objective() {
    let gamma = corr(&[&[1.0, 0.5], &[0.5, 1.0]]);
    let sol = glasso(&gamma, 0.1, &GlassoOptions::default()).unwrap();
    let at_identity = glasso_objective(gamma.as_sym(), &SymMatrix::identity(2), 0.1).unwrap();
    assert!(sol.objective <= at_identity);
    // Grid search over symmetric Θ with equal diagonal entries.
    let mut best = f64::INFINITY;
    for a in 0..=80 {
        for b in 0..=80 {
            let d = 1.0 + a as f64 * 0.01;
            let o = -1.0 + b as f64 * 0.0125;
            if d * d - o * o <= 0.0 {
                continue;
            }
            let t = SymMatrix::from_rows(&[&[d, o], &[o, d]]).unwrap();
            best = best.min(glasso_objective(gamma.as_sym(), &t, 0.1).unwrap());
        }
    }
    assert!(sol.objective <= best + 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn symmetrize_picks_smaller_magnitude(vals in proptest::collection::vec(-2.0f64..2.0, 16)) {
        let raw = DMatrix::from_row_slice(4, 4, &vals);
        let s = symmetrize_min(&raw).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let (a, b) = (raw[(i, j)], raw[(j, i)]);
                let expect = if i <= j {
                    if a.abs() <= b.abs() { a } else { b }
                } else if b.abs() <= a.abs() { b } else { a };
                prop_assert_eq!(s.get(i, j), expect);
            }
        }
    }

    #[test]
    fn glasso_edges_are_exact_zeros(seed in 0u64..1000, lambda in 0.05f64..0.5) {
        let gamma = random_correlation(8, 2, seed);
        let sol = glasso(&gamma, lambda, &GlassoOptions::default()).unwrap();
        let theta = sol.theta.matrix().as_matrix();
        for i in 0..8 {
            for j in (i + 1)..8 {
                let is_edge = sol.theta.edges().contains(&(i, j));
                prop_assert!(is_edge || theta[(i, j)] == 0.0);
            }
        }
    }
}
