//! Edge-recovery metrics, relative errors, matrix diagnostics, ROC sweeps and
//! cross-validation.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{column_correlation, covariance_to_correlation, row_correlation, weights, CorrelationMatrix};
use crate::error::{Error, Result};
use crate::flipflop::{rescaled_step, step2_correlation, step3_correlation};
use crate::gemini::{star_a_precision, star_b_precision};
use crate::glasso::{glasso, GlassoOptions};
use crate::linalg::{cholesky, eigenvalues, l1_norm, l1_off, operator_norm, spd_inverse};
use crate::matrix::{DataSet, SymMatrix};
use crate::models::GroundTruth;
use crate::precision::PrecisionEstimate;
use crate::rng::{RngSpec, FOLD_SLOT};
use crate::sampler::MatrixNormal;
use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub p: usize,
    pub true_edge_count: u64,
}

impl ConfusionCounts {
    /// `FP / (C(p,2) - |E|)`, 0 when there are no non-edges.
    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }

    /// `FN / |E|`, 0 when the true graph is empty.
    pub fn fnr(&self) -> f64 {
        ratio(self.fn_, self.tp + self.fn_)
    }

    /// Matthews correlation coefficient; 0 when any marginal is empty.
    pub fn mcc(&self) -> f64 {
        let (tp, fp, fn_, tn) = (self.tp as f64, self.fp as f64, self.fn_ as f64, self.tn as f64);
        let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if denom == 0.0 {
            return 0.0;
        }
        ((tp * tn - fp * fn_) / denom.sqrt()).clamp(-1.0, 1.0)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn edge_set(edges: &[(usize, usize)], p: usize) -> Result<BTreeSet<(usize, usize)>> {
    let mut set = BTreeSet::new();
    for &(i, j) in edges {
        if i >= j || j >= p {
            return Err(Error::InvalidEdge(i, j, p));
        }
        set.insert((i, j));
    }
    Ok(set)
}

/// Confusion counts over the `C(p, 2)` node pairs. Edges are 0-based `(i, j)`
/// with `i < j`; duplicates are ignored.
pub fn confusion(est_edges: &[(usize, usize)], true_edges: &[(usize, usize)], p: usize) -> Result<ConfusionCounts> {
    let est = edge_set(est_edges, p)?;
    let truth = edge_set(true_edges, p)?;
    let pairs = (p * p.saturating_sub(1) / 2) as u64;
    let tp = est.intersection(&truth).count() as u64;
    let fp = est.len() as u64 - tp;
    let fn_ = truth.len() as u64 - tp;
    let tn = pairs - truth.len() as u64 - fp;
    Ok(ConfusionCounts {
        tp,
        fp,
        fn_,
        tn,
        p,
        true_edge_count: truth.len() as u64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    Operator,
    Frobenius,
}

/// `|est - truth| / |truth|`.
pub fn relative_error(est: &SymMatrix, truth: &SymMatrix, norm: Norm) -> Result<f64> {
    if est.dim() != truth.dim() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", est.dim(), truth.dim())));
    }
    let diff = SymMatrix::symmetrized(est.as_matrix() - truth.as_matrix());
    let size = |s: &SymMatrix| match norm {
        Norm::Operator => operator_norm(s),
        Norm::Frobenius => s.frobenius_norm(),
    };
    let t = size(truth);
    if t == 0.0 {
        return Err(Error::ZeroTruth);
    }
    Ok(size(&diff) / t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `Σ_{i<j} ρ_ij² / C(p, 2)` of the correlation form.
    pub total_correlation: f64,
    pub frob_over_trace: f64,
    /// `|ρ(S)⁻¹|_{1,off}`.
    pub l1_off: f64,
    /// `|ρ(S)⁻¹|_1`.
    pub l1_full: f64,
    pub stable_rank: f64,
    pub condition_number: f64,
}

pub fn diagnostics(s: &SymMatrix) -> Result<Diagnostics> {
    cholesky(s.as_matrix())?;
    let p = s.dim();
    let (rho, _) = covariance_to_correlation(s)?;
    let total_correlation = if p > 1 {
        let mut acc = 0.0;
        for j in 0..p {
            for i in 0..j {
                acc += rho.get(i, j).powi(2);
            }
        }
        acc / (p * (p - 1) / 2) as f64
    } else {
        0.0
    };
    let inv = spd_inverse(rho.as_sym())?;
    let eig = eigenvalues(s);
    let (lo, hi) = (eig[0], eig[p - 1]);
    let frob = s.frobenius_norm();
    Ok(Diagnostics {
        total_correlation,
        frob_over_trace: frob / s.trace(),
        l1_off: l1_off(inv.as_matrix()),
        l1_full: l1_norm(inv.as_matrix()),
        stable_rank: frob * frob / (hi * hi),
        condition_number: hi / lo,
    })
}

/// Metrics for one estimate against one truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub counts: ConfusionCounts,
    pub fpr: f64,
    pub fnr: f64,
    pub mcc: f64,
    pub rel_err_op: f64,
    pub rel_err_frob: f64,
}

impl Metrics {
    fn criterion(&self, c: usize) -> f64 {
        match c {
            0 => self.fnr + self.fpr,
            1 => self.rel_err_op,
            _ => self.rel_err_frob,
        }
    }
}

pub fn evaluate_precision(est: &PrecisionEstimate, truth: &SymMatrix, true_edges: &[(usize, usize)]) -> Result<Metrics> {
    let counts = confusion(est.edges(), true_edges, truth.dim())?;
    Ok(Metrics {
        counts,
        fpr: counts.fpr(),
        fnr: counts.fnr(),
        mcc: counts.mcc(),
        rel_err_op: relative_error(est.matrix(), truth, Norm::Operator)?,
        rel_err_frob: relative_error(est.matrix(), truth, Norm::Frobenius)?,
    })
}

/// Trace-normalized targets `Ω_* = (tr(A)/m) Ω` and `Π_* = (m/tr(A)) Π`.
pub fn star_truth(a_cov: &SymMatrix, omega: &SymMatrix, pi: &SymMatrix) -> (SymMatrix, SymMatrix) {
    let m = a_cov.dim() as f64;
    let t = a_cov.trace();
    (omega.scale(t / m), pi.scale(m / t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Gemini,
    Nipff,
}

/// Per-penalty averages over successful trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub penalty: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub mcc: f64,
    pub rel_err_op: f64,
    pub rel_err_frob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: u32,
    pub penalty: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub fpr: f64,
    pub fnr: f64,
    pub mcc: f64,
    pub rel_err_op: f64,
    pub rel_err_frob: f64,
}

/// One curve: a penalty sweep for one target (`omega` or `pi`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub target: String,
    pub curve: String,
    pub dim: usize,
    pub true_edges: usize,
    pub trials: usize,
    pub rows: Vec<ReportRow>,
    pub per_trial: Vec<TrialRow>,
}

impl EvalReport {
    fn from_trials(target: &str, curve: &str, dim: usize, true_edges: usize, grid: &[f64], trials: &[(u32, Vec<Metrics>)]) -> Self {
        let k = trials.len() as f64;
        let rows = grid
            .iter()
            .enumerate()
            .map(|(g, &penalty)| {
                let mut row = ReportRow {
                    penalty,
                    fpr: 0.0,
                    fnr: 0.0,
                    mcc: 0.0,
                    rel_err_op: 0.0,
                    rel_err_frob: 0.0,
                };
                // Ascending trial order keeps the sums bit-stable.
                for (_, ms) in trials {
                    let mt = &ms[g];
                    row.fpr += mt.fpr;
                    row.fnr += mt.fnr;
                    row.mcc += mt.mcc;
                    row.rel_err_op += mt.rel_err_op;
                    row.rel_err_frob += mt.rel_err_frob;
                }
                if k > 0.0 {
                    row.fpr /= k;
                    row.fnr /= k;
                    row.mcc /= k;
                    row.rel_err_op /= k;
                    row.rel_err_frob /= k;
                }
                row
            })
            .collect();
        let per_trial = trials
            .iter()
            .flat_map(|(t, ms)| {
                grid.iter().zip(ms).map(move |(&penalty, mt)| TrialRow {
                    trial: *t,
                    penalty,
                    tp: mt.counts.tp,
                    fp: mt.counts.fp,
                    fn_: mt.counts.fn_,
                    tn: mt.counts.tn,
                    fpr: mt.fpr,
                    fnr: mt.fnr,
                    mcc: mt.mcc,
                    rel_err_op: mt.rel_err_op,
                    rel_err_frob: mt.rel_err_frob,
                })
            })
            .collect();
        EvalReport {
            target: target.into(),
            curve: curve.into(),
            dim,
            true_edges,
            trials: trials.len(),
            rows,
            per_trial,
        }
    }

    /// Index of the smallest averaged value of `key`; ties go to the smaller penalty.
    pub fn argmin_by(&self, key: impl Fn(&ReportRow) -> f64) -> Option<usize> {
        argmin(self.rows.iter().map(key))
    }
}

fn argmin(values: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedTrial {
    pub trial: u32,
    pub cause: String,
}

/// Penalties picked inside one flip-flop trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageChoice {
    pub trial: u32,
    /// `ν₁, ν₂, ν₃`: step-1 penalties minimizing FPR+FNR, operator and
    /// Frobenius error of `Π̂`.
    pub nu: [f64; 3],
    /// `(i_j, φ_j)`: which step-1 choice and which step-2 penalty were used
    /// for each criterion (`i_j` is 1-based).
    pub phi: [(usize, f64); 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocReport {
    pub schema_version: u32,
    pub method: Method,
    pub n: usize,
    pub seed: u64,
    pub trials_requested: usize,
    pub trials_ok: usize,
    pub failed: Vec<FailedTrial>,
    /// Curves for `Ω̂` (column side).
    pub omega: Vec<EvalReport>,
    /// Curves for `Π̂` (row side).
    pub pi: Vec<EvalReport>,
    pub stages: Vec<StageChoice>,
}

impl RocReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Flat CSV, one row per curve x trial x penalty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "target", "curve", "trial", "penalty", "tp", "fp", "fn", "tn", "fpr", "fnr", "mcc", "rel_err_op", "rel_err_frob",
        ])?;
        for rep in self.omega.iter().chain(&self.pi) {
            for r in &rep.per_trial {
                out.write_record([
                    rep.target.clone(),
                    rep.curve.clone(),
                    r.trial.to_string(),
                    crate::csvio::format_f64(r.penalty),
                    r.tp.to_string(),
                    r.fp.to_string(),
                    r.fn_.to_string(),
                    r.tn.to_string(),
                    crate::csvio::format_f64(r.fpr),
                    crate::csvio::format_f64(r.fnr),
                    crate::csvio::format_f64(r.mcc),
                    crate::csvio::format_f64(r.rel_err_op),
                    crate::csvio::format_f64(r.rel_err_frob),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("penalty grid is empty".into()));
    }
    if grid.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter("penalties must be finite and non-negative".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter("penalty grid must be strictly ascending".into()));
    }
    Ok(())
}

/// Inputs shared by every trial of a ROC sweep.
#[derive(Debug, Clone)]
pub struct RocSetup<'a> {
    pub truth_a: &'a GroundTruth,
    pub truth_b: &'a GroundTruth,
    pub n: usize,
    /// Penalties for the column (`Ω̂`) side.
    pub grid_a: &'a [f64],
    /// Penalties for the row (`Π̂`) side.
    pub grid_b: &'a [f64],
    pub trials: usize,
    pub method: Method,
    pub rng: RngSpec,
    pub opts: GlassoOptions,
}

struct TrialOutcome {
    omega: Vec<Vec<Metrics>>,
    pi: Vec<Vec<Metrics>>,
    stage: Option<StageChoice>,
}

/// Runs `trials` independent simulations and sweeps both penalty grids.
///
/// For the flip-flop method the first row-side curve is the step-1 (Gemini)
/// sweep; the three column-side curves are step 2 started from `ν₁..ν₃`, and
/// the remaining three row-side curves are step 3 started from the
/// corresponding best step-2 estimates.
pub fn roc_sweep(setup: &RocSetup) -> Result<RocReport> {
    check_grid(setup.grid_a)?;
    check_grid(setup.grid_b)?;
    if setup.trials == 0 || setup.n == 0 {
        return Err(Error::InvalidParameter("trials and n must be at least 1".into()));
    }
    let sampler = MatrixNormal::new(&setup.truth_a.covariance, &setup.truth_b.covariance)?;
    let (omega_star, pi_star) = star_truth(&setup.truth_a.covariance, &setup.truth_a.precision, &setup.truth_b.precision);

    let outcomes: Vec<(u32, Result<TrialOutcome>)> = (0..setup.trials as u32)
        .into_par_iter()
        .map(|t| {
            let data = sampler.sample(setup.n, &setup.rng, t);
            let out = data.and_then(|d| match setup.method {
                Method::Gemini => gemini_trial(setup, &d, &omega_star, &pi_star),
                Method::Nipff => nipff_trial(setup, &d, &omega_star, &pi_star, t),
            });
            (t, out)
        })
        .collect();

    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (t, out) in outcomes {
        match out {
            Ok(o) => ok.push((t, o)),
            Err(e) => {
                log::warn!("trial {t} failed: {e}");
                failed.push(FailedTrial { trial: t, cause: e.to_string() });
            }
        }
    }

    let m = setup.truth_a.covariance.dim();
    let f = setup.truth_b.covariance.dim();
    let ea = setup.truth_a.edges.len();
    let eb = setup.truth_b.edges.len();
    let curve = |pick: &dyn Fn(&TrialOutcome) -> &Vec<Metrics>| -> Vec<(u32, Vec<Metrics>)> {
        ok.iter().map(|(t, o)| (*t, pick(o).clone())).collect()
    };
    let (omega, pi) = match setup.method {
        Method::Gemini => (
            vec![EvalReport::from_trials("omega", "gemini", m, ea, setup.grid_a, &curve(&|o| &o.omega[0]))],
            vec![EvalReport::from_trials("pi", "gemini", f, eb, setup.grid_b, &curve(&|o| &o.pi[0]))],
        ),
        Method::Nipff => {
            let omega = (0..3)
                .map(|i| EvalReport::from_trials("omega", &format!("ff_{}", i + 1), m, ea, setup.grid_a, &curve(&|o| &o.omega[i])))
                .collect();
            let mut pi = vec![EvalReport::from_trials("pi", "gemini", f, eb, setup.grid_b, &curve(&|o| &o.pi[0]))];
            pi.extend((1..4).map(|j| EvalReport::from_trials("pi", &format!("ff_{j}"), f, eb, setup.grid_b, &curve(&|o| &o.pi[j]))));
            (omega, pi)
        }
    };
    let stages = ok.iter().filter_map(|(_, o)| o.stage.clone()).collect();
    Ok(RocReport {
        schema_version: SCHEMA_VERSION,
        method: setup.method,
        n: setup.n,
        seed: setup.rng.seed,
        trials_requested: setup.trials,
        trials_ok: ok.len(),
        failed,
        omega,
        pi,
        stages,
    })
}

/// Unit diagonal of the glasso fit makes `tr(Ŵ₁Â_ρŴ₁) = Σ w1²`.
fn gemini_trial(setup: &RocSetup, data: &DataSet, omega_star: &SymMatrix, pi_star: &SymMatrix) -> Result<TrialOutcome> {
    let gamma_a = column_correlation(data)?;
    let gamma_b = row_correlation(data)?;
    let w = weights(data)?;
    let m = data.m() as f64;
    let trace_a1: f64 = w.w1.iter().map(|v| v * v).sum();
    let omega = setup
        .grid_a
        .iter()
        .map(|&lam| {
            let sol = glasso(&gamma_a, lam, &setup.opts)?;
            evaluate_precision(&star_a_precision(&sol.theta, &w.w1, trace_a1, m), omega_star, &setup.truth_a.edges)
        })
        .collect::<Result<Vec<_>>>()?;
    let pi = setup
        .grid_b
        .iter()
        .map(|&nu| {
            let sol = glasso(&gamma_b, nu, &setup.opts)?;
            let prec = star_b_precision(&sol.theta, &w.w2, trace_a1, m, w.frob2_mean);
            evaluate_precision(&prec, pi_star, &setup.truth_b.edges)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialOutcome {
        omega: vec![omega],
        pi: vec![pi],
        stage: None,
    })
}

fn nipff_trial(setup: &RocSetup, data: &DataSet, omega_star: &SymMatrix, pi_star: &SymMatrix, trial: u32) -> Result<TrialOutcome> {
    let gamma_b = row_correlation(data)?;
    let w = weights(data)?;
    let m = data.m() as f64;

    // Steps 1-2 of the protocol: the step-1 sweep, keeping each B₁(ν).
    let mut b1s = Vec::with_capacity(setup.grid_b.len());
    let mut pi0 = Vec::with_capacity(setup.grid_b.len());
    for &nu in setup.grid_b {
        let sol = glasso(&gamma_b, nu, &setup.opts)?;
        let b1 = sol.w.congruence_diag(&w.w2).scale(1.0 / m);
        let inv_scale: Vec<f64> = w.w2.iter().map(|v| m.sqrt() / v).collect();
        pi0.push(evaluate_precision(&sol.theta.congruence_diag(&inv_scale), pi_star, &setup.truth_b.edges)?);
        b1s.push(b1);
    }
    let nu_idx: [usize; 3] = std::array::from_fn(|c| argmin(pi0.iter().map(|mt| mt.criterion(c))).expect("grid is non-empty"));

    // Step 2 over the column grid for each chosen B₁; identical choices share work.
    let mut omega_curves: Vec<Vec<Metrics>> = Vec::with_capacity(3);
    let mut best: [Option<(f64, usize, usize, SymMatrix)>; 3] = [None, None, None];
    for i in 0..3 {
        if let Some(prev) = (0..i).find(|&k| nu_idx[k] == nu_idx[i]) {
            omega_curves.push(omega_curves[prev].clone());
            continue;
        }
        let (gamma2, w1) = step2_correlation(data, &b1s[nu_idx[i]])?;
        let mut curve = Vec::with_capacity(setup.grid_a.len());
        for (g, &phi) in setup.grid_a.iter().enumerate() {
            let fit = rescaled_step(&gamma2, &w1, phi, &setup.opts, 2)?;
            let mt = evaluate_precision(&fit.prec, omega_star, &setup.truth_a.edges)?;
            for (c, slot) in best.iter_mut().enumerate() {
                let v = mt.criterion(c);
                if slot.as_ref().is_none_or(|(b, ..)| v < *b) {
                    *slot = Some((v, i, g, fit.cov.clone()));
                }
            }
            curve.push(mt);
        }
        omega_curves.push(curve);
    }

    // Step 3 from each selected A₁.
    let best: Vec<(f64, usize, usize, SymMatrix)> = best.into_iter().map(|b| b.expect("grid is non-empty")).collect();
    let mut pi_curves = vec![pi0];
    for j in 0..3 {
        if let Some(prev) = (0..j).find(|&k| best[k].1 == best[j].1 && best[k].2 == best[j].2) {
            let c = pi_curves[prev + 1].clone();
            pi_curves.push(c);
            continue;
        }
        let (gamma3, w2t) = step3_correlation(data, &best[j].3)?;
        let curve = setup
            .grid_b
            .iter()
            .map(|&ups| {
                let fit = rescaled_step(&gamma3, &w2t, ups, &setup.opts, 3)?;
                evaluate_precision(&fit.prec, pi_star, &setup.truth_b.edges)
            })
            .collect::<Result<Vec<_>>>()?;
        pi_curves.push(curve);
    }

    let stage = StageChoice {
        trial,
        nu: nu_idx.map(|k| setup.grid_b[k]),
        phi: std::array::from_fn(|j| (best[j].1 + 1, setup.grid_a[best[j].2])),
    };
    Ok(TrialOutcome {
        omega: omega_curves,
        pi: pi_curves,
        stage: Some(stage),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CvSide {
    /// Column-side penalty; folds partition rows.
    A,
    /// Row-side penalty; folds partition columns.
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub penalty: f64,
    pub mean_score: f64,
    /// Number of (trial, fold) pairs that contributed.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub schema_version: u32,
    pub side: CvSide,
    pub folds: usize,
    pub trials: usize,
    pub chosen: f64,
    pub scores: Vec<CvScore>,
    pub skipped_folds: usize,
}

/// Splits a random permutation of `0..available` into `folds` near-equal
/// contiguous chunks; the first `available % folds` chunks get one extra index.
pub fn fold_partition(available: usize, folds: usize, rng: &RngSpec, trial: u32) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..available).collect();
    perm.shuffle(&mut rng.stream(trial, FOLD_SLOT));
    let base = available / folds;
    let extra = available % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for k in 0..folds {
        let len = base + usize::from(k < extra);
        out.push(perm[start..start + len].to_vec());
        start += len;
    }
    out
}

/// `tr(Θ Γ̂_V) - log|Θ|`.
pub fn cv_score(theta: &SymMatrix, gamma_v: &CorrelationMatrix) -> Result<f64> {
    let chol = cholesky(theta.as_matrix())?;
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(theta.as_matrix().component_mul(gamma_v.as_matrix()).sum() - log_det)
}

/// K-fold cross-validation of the glasso penalty on one side, averaged over
/// `trials` random partitions. Returns the minimizing penalty, ties to the
/// smaller one.
pub fn cross_validate(
    data: &DataSet,
    grid: &[f64],
    folds: usize,
    trials: usize,
    side: CvSide,
    rng: &RngSpec,
    opts: &GlassoOptions,
) -> Result<CvResult> {
    check_grid(grid)?;
    if trials == 0 {
        return Err(Error::InvalidParameter("cross-validation needs at least one trial".into()));
    }
    let available = match side {
        CvSide::A => data.f(),
        CvSide::B => data.m(),
    };
    if folds < 2 || available < folds {
        return Err(Error::FoldTooSmall { available, folds });
    }

    let jobs: Vec<(u32, usize, Vec<usize>)> = (0..trials as u32)
        .flat_map(|t| {
            fold_partition(available, folds, rng, t)
                .into_iter()
                .enumerate()
                .map(move |(k, v)| (t, k, v))
        })
        .collect();

    let results: Vec<Option<Vec<f64>>> = jobs
        .par_iter()
        .map(|(t, k, val)| -> Result<Option<Vec<f64>>> {
            let mut train: Vec<usize> = (0..available).filter(|i| !val.contains(i)).collect();
            train.sort_unstable();
            let mut val = val.clone();
            val.sort_unstable();
            let corr = |idx: &[usize]| -> Result<CorrelationMatrix> {
                match side {
                    CvSide::A => column_correlation(&data.select_rows(idx)?),
                    CvSide::B => row_correlation(&data.select_columns(idx)?),
                }
            };
            let pair = corr(&train).and_then(|gt| Ok((gt, corr(&val)?)));
            let (gamma_t, gamma_v) = match pair {
                Ok(p) => p,
                Err(e @ (Error::DegenerateColumn(_) | Error::DegenerateRow(_))) => {
                    log::warn!("cross-validation trial {t} fold {k} skipped: {e}");
                    return Ok(None);
                }
                Err(e) => return Err(e),
            };
            grid.iter()
                .map(|&lam| {
                    let sol = glasso(&gamma_t, lam, opts)?;
                    cv_score(sol.theta.matrix(), &gamma_v)
                })
                .collect::<Result<Vec<_>>>()
                .map(Some)
        })
        .collect::<Result<Vec<_>>>()?;

    let used: Vec<&Vec<f64>> = results.iter().flatten().collect();
    let skipped_folds = results.len() - used.len();
    if used.is_empty() {
        return Err(Error::InvalidParameter("every cross-validation fold was degenerate".into()));
    }
    let scores: Vec<CvScore> = grid
        .iter()
        .enumerate()
        .map(|(g, &penalty)| CvScore {
            penalty,
            mean_score: used.iter().map(|s| s[g]).sum::<f64>() / used.len() as f64,
            count: used.len(),
        })
        .collect();
    let best = argmin(scores.iter().map(|s| s.mean_score)).expect("grid is non-empty");
    Ok(CvResult {
        schema_version: SCHEMA_VERSION,
        side,
        folds,
        trials,
        chosen: grid[best],
        scores,
        skipped_folds,
    })
}
