//! Noniterative penalized flip-flop (NiPFF).
//!
//! Three fixed steps, each a graphical lasso on a re-weighted correlation:
//!
//! 1. `B̂_ρ` from the row correlation with `λ_{A₀}`, then `B₁ = Ŵ₂B̂_ρŴ₂/m`.
//! 2. `Ã(B₁) = (1/nf) Σ Xᵀ B₁⁻¹ X`, re-correlated by `W̃₁ = diag(Ã)^{1/2}`,
//!    glasso with `λ_{B₁}`, giving `Â_* = W̃₁Â_ρW̃₁`.
//! 3. `B̃(Â_*) = (1/nm) Σ X Â_*⁻¹ Xᵀ`, re-correlated by `W̃₂`, glasso with
//!    `λ_{A₁}`, giving `B̂_* = W̃₂B̂_ρW̃₂`.
//!
//! Step 1 assumes `f <= m`. Wider inputs are transposed first and the outputs
//! mapped back, with the orientation recorded.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::correlation::{covariance_to_correlation, row_correlation, weights, CorrelationMatrix};
use crate::error::{Error, Result};
use crate::gemini::{clamp_rate, PenaltyConfig, PenaltyMode};
use crate::glasso::{glasso, GlassoOptions};
use crate::linalg::cholesky;
use crate::matrix::{DataSet, SymMatrix};
use crate::precision::PrecisionEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Original,
    Transposed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NipffPenalties {
    pub lambda_a0: f64,
    pub lambda_b1: f64,
    pub lambda_a1: f64,
    pub clamped: bool,
}

/// `(1/(n f)) Σ_t X(t)ᵀ B⁻¹ X(t)`, via a Cholesky solve.
pub fn tilde_a(data: &DataSet, b: &SymMatrix) -> Result<SymMatrix> {
    if b.dim() != data.f() {
        return Err(Error::DimensionMismatch(format!("B is {0}x{0}, data has {1} rows", b.dim(), data.f())));
    }
    let chol = cholesky(b.as_matrix())?;
    let mut acc = DMatrix::zeros(data.m(), data.m());
    for x in data.replicates() {
        let y = chol.l().solve_lower_triangular(x).ok_or(Error::NotPd)?;
        acc += y.tr_mul(&y);
    }
    acc /= (data.n() * data.f()) as f64;
    Ok(SymMatrix::symmetrized(acc))
}

/// `(1/(n m)) Σ_t X(t) A⁻¹ X(t)ᵀ`.
pub fn tilde_b(data: &DataSet, a: &SymMatrix) -> Result<SymMatrix> {
    if a.dim() != data.m() {
        return Err(Error::DimensionMismatch(format!("A is {0}x{0}, data has {1} columns", a.dim(), data.m())));
    }
    let chol = cholesky(a.as_matrix())?;
    let mut acc = DMatrix::zeros(data.f(), data.f());
    for x in data.replicates() {
        let y = chol.l().solve_lower_triangular(&x.transpose()).ok_or(Error::NotPd)?;
        acc += y.tr_mul(&y);
    }
    acc /= (data.n() * data.m()) as f64;
    Ok(SymMatrix::symmetrized(acc))
}

/// Theory-mode penalties for the three steps. `λ_{A₁}` mirrors `λ_{B₁}`.
pub fn nipff_penalties(f: usize, m: usize, n: usize, cfg: &PenaltyConfig) -> Result<NipffPenalties> {
    if f < 2 || m < 2 {
        return Err(Error::DimensionTooSmall { dim: f.min(m), needed: 2 });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("replicate count must be at least 1".into()));
    }
    if !(cfg.eps > 0.0 && cfg.eps < 2.0 / 3.0) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 2/3), got {}", cfg.eps)));
    }
    if !(cfg.c >= 0.0) || !(cfg.c_a > 0.0) || !(cfg.c2 >= 0.0) {
        return Err(Error::InvalidParameter("theory constants must be non-negative".into()));
    }
    let log_term = (m.max(f) as f64).ln();
    let lambda_mn = cfg.c * (log_term / (m * n) as f64).sqrt();
    let lambda_fn = cfg.c * (log_term / (f * n) as f64).sqrt();
    let (alpha, clamped) = clamp_rate(cfg.c_a * lambda_mn, "alpha");
    let floor = cfg.min_penalty;
    let lambda_a0 = (2.0 * alpha / (cfg.eps * (1.0 - alpha))).max(floor);
    let lambda_b1 = (cfg.c2 * (lambda_fn + lambda_mn)).max(floor);
    Ok(NipffPenalties {
        lambda_a0,
        lambda_b1,
        lambda_a1: lambda_b1,
        clamped,
    })
}

fn resolve_penalties(f: usize, m: usize, n: usize, cfg: &PenaltyConfig) -> Result<NipffPenalties> {
    match cfg.mode {
        PenaltyMode::Theory => nipff_penalties(f, m, n, cfg),
        PenaltyMode::Explicit => match (cfg.lambda_a, cfg.lambda_b) {
            // λ_A drives both row-side programs, λ_B the column-side one.
            (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Ok(NipffPenalties {
                lambda_a0: a,
                lambda_b1: b,
                lambda_a1: a,
                clamped: false,
            }),
            _ => Err(Error::InvalidParameter(
                "explicit mode requires positive lambda_a and lambda_b".into(),
            )),
        },
        PenaltyMode::Cv => Err(Error::InvalidParameter(
            "cross-validated penalties are not supported for the flip-flop method".into(),
        )),
    }
}

/// Outputs of the three steps. The intermediate quantities (`b1`,
/// `gamma_step2`, `gamma_step3`, penalties) are in the orientation the steps
/// ran in; `a_star`, `b_star` and the precisions always refer to the input's
/// columns (`m x m`) and rows (`f x f`).
#[derive(Debug, Clone)]
pub struct NipffResult {
    pub orientation: Orientation,
    pub b1: SymMatrix,
    pub gamma_step2: CorrelationMatrix,
    pub gamma_step3: CorrelationMatrix,
    /// Step-2 and step-3 glasso fits on the re-correlated inputs.
    pub a_rho: SymMatrix,
    pub b_rho: SymMatrix,
    pub a_rho_prec: PrecisionEstimate,
    pub b_rho_prec: PrecisionEstimate,
    pub a_star: SymMatrix,
    pub b_star: SymMatrix,
    pub a_prec: PrecisionEstimate,
    pub b_prec: PrecisionEstimate,
    pub penalties: NipffPenalties,
    /// Glasso sweep counts for steps 1 to 3.
    pub iterations: [usize; 3],
}

/// Step 1 output: `B₁ = Ŵ₂B̂_ρŴ₂/m`.
pub fn step1(data: &DataSet, lambda_a0: f64, opts: &GlassoOptions) -> Result<(SymMatrix, usize)> {
    let run = || -> Result<(SymMatrix, usize)> {
        let gamma_b = row_correlation(data)?;
        let w = weights(data)?;
        let sol = glasso(&gamma_b, lambda_a0, opts)?;
        let b1 = sol.w.congruence_diag(&w.w2).scale(1.0 / data.m() as f64);
        Ok((b1, sol.iterations))
    };
    run().map_err(|e| e.at_step(1))
}

/// Re-correlation of `Ã(B₁)`, returned with `W̃₁`.
pub fn step2_correlation(data: &DataSet, b1: &SymMatrix) -> Result<(CorrelationMatrix, Vec<f64>)> {
    let run = || covariance_to_correlation(&tilde_a(data, b1)?);
    run().map_err(|e| e.at_step(2))
}

/// Re-correlation of `B̃(A₁)`, returned with `W̃₂`.
pub fn step3_correlation(data: &DataSet, a1: &SymMatrix) -> Result<(CorrelationMatrix, Vec<f64>)> {
    let run = || covariance_to_correlation(&tilde_b(data, a1)?);
    run().map_err(|e| e.at_step(3))
}

/// Glasso on a re-correlated input, mapped back to covariance scale.
pub(crate) struct StepFit {
    pub rho: SymMatrix,
    pub rho_prec: PrecisionEstimate,
    /// `W̃ Ŵ W̃`.
    pub cov: SymMatrix,
    /// `W̃⁻¹ Θ̂ W̃⁻¹`.
    pub prec: PrecisionEstimate,
    pub iterations: usize,
}

pub(crate) fn rescaled_step(gamma: &CorrelationMatrix, scale: &[f64], lambda: f64, opts: &GlassoOptions, step: usize) -> Result<StepFit> {
    let sol = glasso(gamma, lambda, opts).map_err(|e| e.at_step(step))?;
    let cov = sol.w.congruence_diag(scale);
    let inv: Vec<f64> = scale.iter().map(|s| 1.0 / s).collect();
    let prec = sol.theta.congruence_diag(&inv);
    Ok(StepFit {
        rho: sol.w,
        rho_prec: sol.theta,
        cov,
        prec,
        iterations: sol.iterations,
    })
}

fn run_oriented(data: &DataSet, pen: NipffPenalties, opts: &GlassoOptions) -> Result<NipffResult> {
    let (b1, it1) = step1(data, pen.lambda_a0, opts)?;
    let (gamma2, w1) = step2_correlation(data, &b1)?;
    let a = rescaled_step(&gamma2, &w1, pen.lambda_b1, opts, 2)?;
    let (gamma3, w2) = step3_correlation(data, &a.cov)?;
    let b = rescaled_step(&gamma3, &w2, pen.lambda_a1, opts, 3)?;
    Ok(NipffResult {
        orientation: Orientation::Original,
        b1,
        gamma_step2: gamma2,
        gamma_step3: gamma3,
        a_rho: a.rho,
        b_rho: b.rho,
        a_rho_prec: a.rho_prec,
        b_rho_prec: b.rho_prec,
        a_star: a.cov,
        b_star: b.cov,
        a_prec: a.prec,
        b_prec: b.prec,
        penalties: pen,
        iterations: [it1, a.iterations, b.iterations],
    })
}

/// Runs the three steps with penalties resolved from `cfg` (theory or explicit).
pub fn nipff(data: &DataSet, cfg: &PenaltyConfig, opts: &GlassoOptions) -> Result<NipffResult> {
    if data.f() <= data.m() {
        let pen = resolve_penalties(data.f(), data.m(), data.n(), cfg)?;
        run_oriented(data, pen, opts)
    } else {
        let t = data.transposed();
        // Explicit penalties name the input's sides, which swap roles here.
        let swapped = PenaltyConfig {
            lambda_a: cfg.lambda_b,
            lambda_b: cfg.lambda_a,
            ..cfg.clone()
        };
        let pen = resolve_penalties(t.f(), t.m(), t.n(), &swapped)?;
        let mut r = run_oriented(&t, pen, opts)?;
        std::mem::swap(&mut r.a_star, &mut r.b_star);
        std::mem::swap(&mut r.a_prec, &mut r.b_prec);
        std::mem::swap(&mut r.a_rho, &mut r.b_rho);
        std::mem::swap(&mut r.a_rho_prec, &mut r.b_rho_prec);
        r.orientation = Orientation::Transposed;
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DataSet {
        let x = DMatrix::from_fn(3, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.5 + 0.1 * j as f64);
        DataSet::new(vec![x]).unwrap()
    }

    #[test]
    fn identity_plug_in_is_gram_over_dim() {
        let data = sample();
        let x = &data.replicates()[0];
        let ta = tilde_a(&data, &SymMatrix::identity(3)).unwrap();
        assert!((ta.as_matrix() - x.tr_mul(x) / 3.0).abs().max() < 1e-12);
        let tb = tilde_b(&data, &SymMatrix::identity(4)).unwrap();
        assert!((tb.as_matrix() - x * x.transpose() / 4.0).abs().max() < 1e-12);
    }

    #[test]
    fn linear_in_inverse() {
        let data = sample();
        let b = SymMatrix::from_rows(&[&[2.0, 0.3, 0.0], &[0.3, 1.0, 0.1], &[0.0, 0.1, 1.5]]).unwrap();
        let t1 = tilde_a(&data, &b).unwrap();
        let t2 = tilde_a(&data, &b.scale(2.0)).unwrap();
        assert!((t1.as_matrix() / 2.0 - t2.as_matrix()).abs().max() < 1e-12);
    }

    #[test]
    fn penalties_floor_and_symmetry() {
        let zero = PenaltyConfig { c: 0.0, ..Default::default() };
        let p = nipff_penalties(80, 400, 1, &zero).unwrap();
        assert_eq!((p.lambda_a0, p.lambda_b1, p.lambda_a1), (1e-6, 1e-6, 1e-6));
        let p = nipff_penalties(30, 30, 2, &PenaltyConfig::default()).unwrap();
        assert_eq!(p.lambda_b1, p.lambda_a1);
    }

    #[test]
    fn wide_input_is_transposed() {
        let x = DMatrix::from_fn(5, 3, |i, j| ((i * 5 + j * 2) % 7) as f64 - 3.0 + 0.01 * i as f64);
        let data = DataSet::new(vec![x]).unwrap();
        let r = nipff(&data, &PenaltyConfig::explicit(0.9, 0.9), &GlassoOptions::default()).unwrap();
        assert_eq!(r.orientation, Orientation::Transposed);
        assert_eq!(r.a_star.dim(), 3);
        assert_eq!(r.b_star.dim(), 5);
    }
}
