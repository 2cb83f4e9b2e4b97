//! The Gemini estimators: penalized column and row correlations, recombined
//! with the sample weights into an estimate of `A ⊗ B`.
//!
//! `λ_B` penalizes the column (A-side, `m x m`) program and `λ_A` the row
//! (B-side, `f x f`) program.

use serde::{Deserialize, Serialize};

use crate::clime::{clime, invert_to_correlation, ClimeOptions};
use crate::correlation::{column_correlation, row_correlation, weights, CorrelationMatrix, WeightPair};
use crate::error::{Error, Result};
use crate::evaluation::{cross_validate, CvSide};
use crate::glasso::{glasso, GlassoOptions};
use crate::linalg::{kronecker_guarded, spd_inverse};
use crate::matrix::{DataSet, SymMatrix};
use crate::precision::PrecisionEstimate;
use crate::rng::RngSpec;

/// Upper bound applied to the plug-in rates `α̂`, `β̂`, which must stay below 1/3.
pub const RATE_CAP: f64 = 1.0 / 3.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    Explicit,
    #[default]
    Theory,
    Cv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    #[default]
    Glasso,
    Clime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub mode: PenaltyMode,
    /// Row-side (B) penalty in explicit mode.
    pub lambda_a: Option<f64>,
    /// Column-side (A) penalty in explicit mode.
    pub lambda_b: Option<f64>,
    /// Stands in for the unknown absolute constant in `τ₀`.
    pub c: f64,
    pub eps: f64,
    pub c_a: f64,
    pub c_b: f64,
    /// Multiplier on `λ_{f,n} + λ_{m,n}` for the flip-flop steps 2 and 3.
    pub c2: f64,
    pub min_penalty: f64,
    /// Ascending penalty grid for cross-validation.
    pub grid: Vec<f64>,
    pub folds: usize,
    pub cv_trials: usize,
    pub cv_seed: u64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            mode: PenaltyMode::Theory,
            lambda_a: None,
            lambda_b: None,
            c: 0.5,
            eps: 0.5,
            c_a: 1.0,
            c_b: 1.0,
            c2: 1.0,
            min_penalty: 1e-6,
            grid: default_grid(),
            folds: 10,
            cv_trials: 10,
            cv_seed: 0,
        }
    }
}

impl PenaltyConfig {
    pub fn explicit(lambda_a: f64, lambda_b: f64) -> Self {
        PenaltyConfig {
            mode: PenaltyMode::Explicit,
            lambda_a: Some(lambda_a),
            lambda_b: Some(lambda_b),
            ..Default::default()
        }
    }
}

/// `{0.02, 0.04, ..., 0.72}`.
pub fn default_grid() -> Vec<f64> {
    (1..=36).map(|k| k as f64 * 0.02).collect()
}

/// Resolved penalties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penalties {
    pub lambda_a: f64,
    pub lambda_b: f64,
    /// Set when a plug-in rate hit [`RATE_CAP`].
    pub clamped: bool,
}

pub(crate) fn clamp_rate(rate: f64, name: &str) -> (f64, bool) {
    if rate >= RATE_CAP {
        log::warn!("concentration rate {name} = {rate} is out of range; clamped to {RATE_CAP}");
        (RATE_CAP, true)
    } else {
        (rate, false)
    }
}

fn check_theory_params(f: usize, m: usize, n: usize, cfg: &PenaltyConfig) -> Result<()> {
    if f < 2 || m < 2 {
        return Err(Error::DimensionTooSmall { dim: f.min(m), needed: 2 });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("replicate count must be at least 1".into()));
    }
    if !(cfg.eps > 0.0 && cfg.eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {}", cfg.eps)));
    }
    if !(cfg.c >= 0.0) || !(cfg.c_a > 0.0) || !(cfg.c_b > 0.0) {
        return Err(Error::InvalidParameter("theory constants must be non-negative".into()));
    }
    Ok(())
}

/// Theory-mode penalties.
pub fn theory_penalties(f: usize, m: usize, n: usize, cfg: &PenaltyConfig) -> Result<Penalties> {
    check_theory_params(f, m, n, cfg)?;
    let tau0 = cfg.c * ((m.max(f) as f64).ln() / n as f64).sqrt();
    let (alpha, ca) = clamp_rate(cfg.c_a * tau0 / (m as f64).sqrt(), "alpha");
    let (beta, cb) = clamp_rate(cfg.c_b * tau0 / (f as f64).sqrt(), "beta");
    let lambda_b = (2.0 * beta / (1.0 - beta) / cfg.eps).max(cfg.min_penalty);
    let lambda_a = (2.0 * alpha / (1.0 - alpha) / cfg.eps).max(cfg.min_penalty);
    Ok(Penalties {
        lambda_a,
        lambda_b,
        clamped: ca || cb,
    })
}

/// Resolves `(λ_A, λ_B)` according to `cfg.mode`. Cross-validation needs the data.
pub fn select_penalties(f: usize, m: usize, n: usize, cfg: &PenaltyConfig, data: Option<&DataSet>) -> Result<Penalties> {
    match cfg.mode {
        PenaltyMode::Explicit => match (cfg.lambda_a, cfg.lambda_b) {
            (Some(a), Some(b)) if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() => Ok(Penalties {
                lambda_a: a,
                lambda_b: b,
                clamped: false,
            }),
            _ => Err(Error::InvalidParameter(
                "explicit mode requires positive lambda_a and lambda_b".into(),
            )),
        },
        PenaltyMode::Theory => theory_penalties(f, m, n, cfg),
        PenaltyMode::Cv => {
            let data = data.ok_or_else(|| Error::InvalidParameter("cross-validation needs data".into()))?;
            let rng = RngSpec::new(cfg.cv_seed);
            let glasso_opts = GlassoOptions::default();
            let a_side = cross_validate(data, &cfg.grid, cfg.folds, cfg.cv_trials, CvSide::A, &rng, &glasso_opts)?;
            let b_side = cross_validate(data, &cfg.grid, cfg.folds, cfg.cv_trials, CvSide::B, &rng.derive(1), &glasso_opts)?;
            Ok(Penalties {
                lambda_a: b_side.chosen,
                lambda_b: a_side.chosen,
                clamped: false,
            })
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolverOptions {
    pub glasso: GlassoOptions,
    pub clime: ClimeOptions,
}

/// Per-side solver statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub lambda: f64,
    pub iterations: usize,
    pub objective: Option<f64>,
    pub kkt_residual: Option<f64>,
    pub feasibility_residual: Option<f64>,
    /// CLIME only: the symmetrized estimate needed an eigenvalue shift.
    pub repaired: bool,
    pub shift: f64,
    pub edges: usize,
}

/// One penalized correlation estimate and its inverse.
#[derive(Debug, Clone)]
pub struct SideFit {
    pub rho: SymMatrix,
    pub prec: PrecisionEstimate,
    pub stats: SolveStats,
}

pub fn solve_side(gamma: &CorrelationMatrix, lambda: f64, solver: Solver, opts: &SolverOptions) -> Result<SideFit> {
    match solver {
        Solver::Glasso => {
            let sol = glasso(gamma, lambda, &opts.glasso)?;
            let stats = SolveStats {
                lambda,
                iterations: sol.iterations,
                objective: Some(sol.objective),
                kkt_residual: Some(sol.kkt_residual),
                feasibility_residual: None,
                repaired: false,
                shift: 0.0,
                edges: sol.theta.edges().len(),
            };
            Ok(SideFit {
                rho: sol.w,
                prec: sol.theta,
                stats,
            })
        }
        Solver::Clime => {
            let sol = clime(gamma, lambda, &opts.clime)?;
            let inv = invert_to_correlation(&sol, &opts.clime)?;
            let prec = PrecisionEstimate::new(inv.precision, opts.glasso.edge_tol)?;
            let stats = SolveStats {
                lambda,
                iterations: 0,
                objective: Some(sol.column_objectives.iter().sum()),
                kkt_residual: None,
                feasibility_residual: Some(sol.feasibility_residual),
                repaired: inv.repaired,
                shift: inv.shift,
                edges: prec.edges().len(),
            };
            Ok(SideFit {
                rho: inv.correlation,
                prec,
                stats,
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeminiFit {
    /// `Â_ρ`, `m x m`.
    pub a_rho: SymMatrix,
    /// `B̂_ρ`, `f x f`.
    pub b_rho: SymMatrix,
    pub a_prec: PrecisionEstimate,
    pub b_prec: PrecisionEstimate,
    pub weights: WeightPair,
    pub solver: Solver,
    pub penalties: Penalties,
    pub config: PenaltyConfig,
    pub a_stats: SolveStats,
    pub b_stats: SolveStats,
}

impl GeminiFit {
    pub fn m(&self) -> usize {
        self.a_rho.dim()
    }

    pub fn f(&self) -> usize {
        self.b_rho.dim()
    }
}

/// Full Gemini pipeline: penalties, both correlation programs, weights.
pub fn gemini_estimate(data: &DataSet, cfg: &PenaltyConfig, solver: Solver, opts: &SolverOptions) -> Result<GeminiFit> {
    let penalties = select_penalties(data.f(), data.m(), data.n(), cfg, Some(data))?;
    let gamma_a = column_correlation(data)?;
    let gamma_b = row_correlation(data)?;
    let w = weights(data)?;
    let (a, b) = rayon::join(
        || solve_side(&gamma_a, penalties.lambda_b, solver, opts),
        || solve_side(&gamma_b, penalties.lambda_a, solver, opts),
    );
    let (a, b) = (a?, b?);
    Ok(GeminiFit {
        a_rho: a.rho,
        b_rho: b.rho,
        a_prec: a.prec,
        b_prec: b.prec,
        weights: w,
        solver,
        penalties,
        config: cfg.clone(),
        a_stats: a.stats,
        b_stats: b.stats,
    })
}

/// Factor form of `Â ⊗ B̂`. The `1/frob2_mean` scale sits in the A-factor.
#[derive(Debug, Clone)]
pub struct KroneckerEstimate {
    /// `Ŵ₁ Â_ρ Ŵ₁ / frob2_mean`.
    pub a_factor: SymMatrix,
    /// `Ŵ₂ B̂_ρ Ŵ₂`.
    pub b_factor: SymMatrix,
}

impl KroneckerEstimate {
    /// Explicit `mf x mf` matrix; fails if `mf` exceeds `guard`.
    pub fn materialize(&self, guard: usize) -> Result<SymMatrix> {
        kronecker_guarded(&self.a_factor, &self.b_factor, guard)
    }

    pub fn inverse_factors(&self) -> Result<(SymMatrix, SymMatrix)> {
        Ok((spd_inverse(&self.a_factor)?, spd_inverse(&self.b_factor)?))
    }

    /// `Â⁻¹ ⊗ B̂⁻¹`.
    pub fn materialize_inverse(&self, guard: usize) -> Result<SymMatrix> {
        let (ai, bi) = self.inverse_factors()?;
        kronecker_guarded(&ai, &bi, guard)
    }
}

pub fn assemble_kronecker(fit: &GeminiFit) -> Result<KroneckerEstimate> {
    let frob2 = fit.weights.frob2_mean;
    if !(frob2 > 0.0) {
        return Err(Error::InvalidParameter("mean squared Frobenius norm must be positive".into()));
    }
    Ok(KroneckerEstimate {
        a_factor: fit.a_rho.congruence_diag(&fit.weights.w1).scale(1.0 / frob2),
        b_factor: fit.b_rho.congruence_diag(&fit.weights.w2),
    })
}

/// Trace-normalized factors `Â_* = m Â₁ / tr(Â₁)` (with `Â₁ = Ŵ₁Â_ρŴ₁`) and
/// the matching `B̂_*`, so that `Â_* ⊗ B̂_*` equals the assembled estimate.
#[derive(Debug, Clone)]
pub struct StarEstimate {
    pub a_star: SymMatrix,
    pub b_star: SymMatrix,
    /// `Ω̂ = Â_*⁻¹`.
    pub a_star_prec: PrecisionEstimate,
    /// `Π̂ = B̂_*⁻¹`.
    pub b_star_prec: PrecisionEstimate,
}

pub fn normalize_star(fit: &GeminiFit) -> Result<StarEstimate> {
    let m = fit.m() as f64;
    let frob2 = fit.weights.frob2_mean;
    let a1 = fit.a_rho.congruence_diag(&fit.weights.w1);
    let t = a1.trace();
    if !(t > 0.0) || !(frob2 > 0.0) {
        return Err(Error::NotPd);
    }
    let a_star = a1.scale(m / t);
    let b_star = fit.b_rho.congruence_diag(&fit.weights.w2).scale(t / (m * frob2));
    Ok(StarEstimate {
        a_star,
        b_star,
        a_star_prec: star_a_precision(&fit.a_prec, &fit.weights.w1, t, m),
        b_star_prec: star_b_precision(&fit.b_prec, &fit.weights.w2, t, m, frob2),
    })
}

/// `(m Ŵ₁Â_ρŴ₁ / t)⁻¹ = (t/m) Ŵ₁⁻¹ Θ Ŵ₁⁻¹` with `t = tr(Ŵ₁Â_ρŴ₁)`.
pub(crate) fn star_a_precision(theta: &PrecisionEstimate, w1: &[f64], trace_a1: f64, m: f64) -> PrecisionEstimate {
    let s = (trace_a1 / m).sqrt();
    let d: Vec<f64> = w1.iter().map(|w| s / w).collect();
    theta.congruence_diag(&d)
}

/// `(t Ŵ₂B̂_ρŴ₂ / (m frob2))⁻¹`.
pub(crate) fn star_b_precision(theta: &PrecisionEstimate, w2: &[f64], trace_a1: f64, m: f64, frob2: f64) -> PrecisionEstimate {
    let s = (m * frob2 / trace_a1).sqrt();
    let d: Vec<f64> = w2.iter().map(|w| s / w).collect();
    theta.congruence_diag(&d)
}
