use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use gemini_core::csvio::{format_f64, write_edges, write_matrix};
use gemini_core::evaluation::{
    cross_validate, diagnostics, evaluate_precision, roc_sweep, star_truth, CvResult, CvSide, Method, RocSetup,
};
use gemini_core::flipflop::nipff;
use gemini_core::gemini::{gemini_estimate, normalize_star, PenaltyConfig, PenaltyMode, Solver, SolverOptions};
use gemini_core::glasso::GlassoOptions;
use gemini_core::models::GroundTruth;
use gemini_core::precision::PrecisionEstimate;
use gemini_core::rng::RngSpec;
use gemini_core::sampler::MatrixNormal;
use gemini_core::{SymMatrix, SCHEMA_VERSION};
use serde::Serialize;
use serde_json::json;

use crate::args::{CvArgs, DiagnoseArgs, EstimateArgs, RocArgs, SideArg, SimulateArgs};
use crate::manifest::{load_data, load_truth, Manifest, TruthFiles};

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Truth for the column side is generated from trial slot 0, the row side from 1.
fn generate_truths(a: &gemini_core::models::ModelSpec, b: &gemini_core::models::ModelSpec, rng: &RngSpec) -> Result<(GroundTruth, GroundTruth)> {
    Ok((a.generate(rng, 0)?, b.generate(rng, 1)?))
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let out = &args.out;
    let rng = RngSpec::new(args.seed);
    let (ta, tb) = generate_truths(&args.model_a, &args.model_b, &rng)?;
    let data = MatrixNormal::new(&ta.covariance, &tb.covariance)?.sample(args.n, &rng, 0)?;

    let mut replicates = Vec::with_capacity(args.n);
    for (t, x) in data.replicates().iter().enumerate() {
        let name = format!("X_{}.csv", t + 1);
        write_matrix(&out.join(&name), x)?;
        replicates.push(name);
    }
    let files = TruthFiles {
        model_a: args.model_a.clone(),
        model_b: args.model_b.clone(),
        a_cov: "truth_A_cov.csv".into(),
        a_prec: "truth_A_prec.csv".into(),
        a_edges: "truth_A_edges.csv".into(),
        b_cov: "truth_B_cov.csv".into(),
        b_prec: "truth_B_prec.csv".into(),
        b_edges: "truth_B_edges.csv".into(),
    };
    for (truth, cov, prec, edges) in [
        (&ta, &files.a_cov, &files.a_prec, &files.a_edges),
        (&tb, &files.b_cov, &files.b_prec, &files.b_edges),
    ] {
        write_matrix(&out.join(cov), truth.covariance.as_matrix())?;
        write_matrix(&out.join(prec), truth.precision.as_matrix())?;
        write_edges(&out.join(edges), &truth.precision, &truth.edges)?;
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        f: data.f(),
        m: data.m(),
        n: data.n(),
        seed: args.seed,
        header: false,
        replicates,
        truth: Some(files),
    };
    write_json(&out.join("manifest.json"), &manifest)
}

fn write_side(out: &Path, side: &str, rho: &SymMatrix, prec: &PrecisionEstimate, star: &PrecisionEstimate) -> Result<()> {
    write_matrix(&out.join(format!("{side}_rho.csv")), rho.as_matrix())?;
    write_matrix(&out.join(format!("{side}_prec.csv")), prec.matrix().as_matrix())?;
    write_matrix(&out.join(format!("{side}_star_prec.csv")), star.matrix().as_matrix())?;
    write_edges(&out.join(format!("{side}_edges.csv")), star.matrix(), star.edges())?;
    Ok(())
}

pub fn estimate(args: &EstimateArgs) -> Result<()> {
    let out = &args.out;
    let (data, manifest) = load_data(&args.data)?;
    let cfg = PenaltyConfig {
        mode: args.penalty_mode,
        lambda_a: args.lambda_a,
        lambda_b: args.lambda_b,
        c: args.c,
        eps: args.eps,
        grid: args.grid.0.clone(),
        folds: args.folds,
        cv_trials: args.trials,
        cv_seed: args.seed,
        ..Default::default()
    };
    let base = json!({
        "schema_version": SCHEMA_VERSION,
        "f": data.f(),
        "m": data.m(),
        "n": data.n(),
        "penalty_mode": args.penalty_mode,
    });
    let (omega_hat, pi_hat, mut fit_json) = match args.method {
        Method::Gemini => {
            let fit = gemini_estimate(&data, &cfg, args.solver, &SolverOptions::default())?;
            let star = normalize_star(&fit)?;
            write_side(out, "A", &fit.a_rho, &fit.a_prec, &star.a_star_prec)?;
            write_side(out, "B", &fit.b_rho, &fit.b_prec, &star.b_star_prec)?;
            let j = json!({
                "method": Method::Gemini,
                "solver": fit.solver,
                "penalties": fit.penalties,
                "a_stats": fit.a_stats,
                "b_stats": fit.b_stats,
                "weights": fit.weights,
                "frob2_mean": fit.weights.frob2_mean,
                "a_star_trace": star.a_star.trace(),
                "a_edges": star.a_star_prec.edges().len(),
                "b_edges": star.b_star_prec.edges().len(),
            });
            (star.a_star_prec, star.b_star_prec, j)
        }
        Method::Nipff => {
            if args.solver != Solver::Glasso {
                bail!("the flip-flop method only supports the glasso solver");
            }
            if args.penalty_mode == PenaltyMode::Cv {
                bail!("the flip-flop method takes theory or explicit penalties");
            }
            let r = nipff(&data, &cfg, &GlassoOptions::default())?;
            write_side(out, "A", &r.a_rho, &r.a_rho_prec, &r.a_prec)?;
            write_side(out, "B", &r.b_rho, &r.b_rho_prec, &r.b_prec)?;
            let j = json!({
                "method": Method::Nipff,
                "solver": Solver::Glasso,
                "orientation": r.orientation,
                "penalties": r.penalties,
                "iterations": r.iterations,
                "a_star_trace": r.a_star.trace(),
                "a_edges": r.a_prec.edges().len(),
                "b_edges": r.b_prec.edges().len(),
            });
            (r.a_prec, r.b_prec, j)
        }
    };
    for (k, v) in base.as_object().expect("object literal") {
        fit_json[k] = v.clone();
    }
    write_json(&out.join("fit.json"), &fit_json)?;

    if args.truth {
        let (manifest, dir) = manifest.context("--truth needs a manifest with ground truth")?;
        let truth = load_truth(&manifest, &dir)?;
        let (omega, pi) = star_truth(&truth.a_cov, &truth.a_prec, &truth.b_prec);
        let report = json!({
            "schema_version": SCHEMA_VERSION,
            "method": args.method,
            "omega": evaluate_precision(&omega_hat, &omega, &truth.a_edges)?,
            "pi": evaluate_precision(&pi_hat, &pi, &truth.b_edges)?,
        });
        write_json(&out.join("eval_report.json"), &report)?;
    }
    Ok(())
}

pub fn roc(args: &RocArgs) -> Result<()> {
    let rng = RngSpec::new(args.seed);
    let (ta, tb) = generate_truths(&args.model_a, &args.model_b, &rng)?;
    let grid_b = args.grid_b.as_ref().unwrap_or(&args.grid);
    let setup = RocSetup {
        truth_a: &ta,
        truth_b: &tb,
        n: args.n,
        grid_a: &args.grid.0,
        grid_b: &grid_b.0,
        trials: args.trials,
        method: args.method,
        rng,
        opts: GlassoOptions::default(),
    };
    let report = roc_sweep(&setup)?;
    write_json(&args.out.join("roc_report.json"), &report)?;
    let file = fs::File::create(args.out.join("roc_report.csv"))?;
    report.write_csv(std::io::BufWriter::new(file))?;

    let mut summary = csv::Writer::from_path(args.out.join("roc_summary.csv"))?;
    summary.write_record(["target", "curve", "penalty", "fpr", "fnr", "mcc", "rel_err_op", "rel_err_frob"])?;
    for rep in report.omega.iter().chain(&report.pi) {
        for r in &rep.rows {
            summary.write_record([
                rep.target.clone(),
                rep.curve.clone(),
                format_f64(r.penalty),
                format_f64(r.fpr),
                format_f64(r.fnr),
                format_f64(r.mcc),
                format_f64(r.rel_err_op),
                format_f64(r.rel_err_frob),
            ])?;
        }
    }
    summary.flush()?;
    Ok(())
}

pub fn cv(args: &CvArgs) -> Result<()> {
    let (data, _) = load_data(&args.data)?;
    let rng = RngSpec::new(args.seed);
    let opts = GlassoOptions::default();
    let run = |side: CvSide, rng: &RngSpec| cross_validate(&data, &args.grid.0, args.folds, args.trials, side, rng, &opts);
    let a: Option<CvResult> = match args.side {
        SideArg::A | SideArg::Both => Some(run(CvSide::A, &rng)?),
        SideArg::B => None,
    };
    let b: Option<CvResult> = match args.side {
        SideArg::B | SideArg::Both => Some(run(CvSide::B, &rng.derive(1))?),
        SideArg::A => None,
    };
    write_json(
        &args.out.join("cv_report.json"),
        &json!({ "schema_version": SCHEMA_VERSION, "a": a, "b": b }),
    )?;
    let mut w = csv::Writer::from_path(args.out.join("cv_scores.csv"))?;
    w.write_record(["side", "penalty", "mean_score", "count"])?;
    for (name, res) in [("a", &a), ("b", &b)] {
        if let Some(res) = res {
            for s in &res.scores {
                w.write_record([name.to_string(), format_f64(s.penalty), format_f64(s.mean_score), s.count.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<()> {
    let (s, source) = match (&args.input, &args.model) {
        (Some(path), None) => (
            gemini_core::csvio::read_sym_matrix(path, args.header)?,
            json!("input"),
        ),
        (None, Some(model)) => (model.generate(&RngSpec::new(args.seed), 0)?.covariance, json!(model)),
        _ => bail!("give exactly one of --input or --model"),
    };
    let d = diagnostics(&s)?;
    write_json(
        &args.out.join("diagnostics.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "source": source,
            "dim": s.dim(),
            "diagnostics": d,
        }),
    )
}
