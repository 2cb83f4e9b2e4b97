//! Command-line arguments. Each subcommand's arguments, minus the output
//! directory and thread count, double as the serialized run configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use gemini_core::evaluation::Method;
use gemini_core::gemini::{default_grid, PenaltyMode, Solver};
use gemini_core::models::ModelSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "gemini", version, about = "Kronecker graphical model estimation from matrix-variate data")]
pub struct Cli {
    /// Worker threads for trial and grid level parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Sample replicates from a matrix-variate normal model.
    Simulate(SimulateArgs),
    /// Fit the Gemini or flip-flop estimator to data.
    Estimate(EstimateArgs),
    /// Sweep penalty grids over simulated trials.
    Roc(RocArgs),
    /// Choose penalties by k-fold cross-validation.
    Cv(CvArgs),
    /// Report summary statistics of a covariance matrix.
    Diagnose(DiagnoseArgs),
    /// Re-run a command from a saved run_config.json.
    Rerun(RerunArgs),
}

impl Command {
    pub fn out_dir(&self) -> &PathBuf {
        match self {
            Command::Simulate(a) => &a.out,
            Command::Estimate(a) => &a.out,
            Command::Roc(a) => &a.out,
            Command::Cv(a) => &a.out,
            Command::Diagnose(a) => &a.out,
            Command::Rerun(a) => &a.out,
        }
    }

    pub fn set_out_dir(&mut self, out: PathBuf) {
        match self {
            Command::Simulate(a) => a.out = out,
            Command::Estimate(a) => a.out = out,
            Command::Roc(a) => a.out = out,
            Command::Cv(a) => a.out = out,
            Command::Diagnose(a) => a.out = out,
            Command::Rerun(a) => a.out = out,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Column covariance model, e.g. `ar1:dim=400,rho=0.5`.
    #[arg(long, value_parser = parse_model)]
    pub model_a: ModelSpec,
    /// Row model, e.g. `random:dim=80,edges=80`.
    #[arg(long, value_parser = parse_model)]
    pub model_b: ModelSpec,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DataArgs {
    /// manifest.json written by `simulate`.
    #[arg(long, conflicts_with = "input")]
    pub manifest: Option<PathBuf>,
    /// Replicate CSV files, one f x m matrix each.
    #[arg(long, num_args = 1..)]
    #[serde(default)]
    pub input: Vec<PathBuf>,
    /// Input CSVs start with a header row.
    #[arg(long)]
    #[serde(default)]
    pub header: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = parse_method, default_value = "gemini")]
    pub method: Method,
    #[arg(long, value_parser = parse_solver, default_value = "glasso")]
    pub solver: Solver,
    #[arg(long, value_parser = parse_penalty_mode, default_value = "theory")]
    pub penalty_mode: PenaltyMode,
    /// Row-side penalty. Together with `--lambda-b` this selects explicit mode.
    #[arg(long)]
    pub lambda_a: Option<f64>,
    /// Column-side penalty.
    #[arg(long)]
    pub lambda_b: Option<f64>,
    /// Theory-mode constant.
    #[arg(long, default_value_t = 0.5)]
    pub c: f64,
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    /// Cross-validation grid: `start:stop:step` or a comma list.
    #[arg(long, value_parser = parse_grid, default_value = "0.02:0.72:0.02")]
    pub grid: Grid,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Cross-validation repetitions.
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Score the estimate against the ground truth listed in the manifest.
    #[arg(long)]
    pub truth: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RocArgs {
    #[arg(long, value_parser = parse_model)]
    pub model_a: ModelSpec,
    #[arg(long, value_parser = parse_model)]
    pub model_b: ModelSpec,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Column-side grid.
    #[arg(long, value_parser = parse_grid, default_value = "0.02:0.72:0.02")]
    pub grid: Grid,
    /// Row-side grid; defaults to `--grid`.
    #[arg(long, value_parser = parse_grid)]
    pub grid_b: Option<Grid>,
    #[arg(long, value_parser = parse_method, default_value = "gemini")]
    pub method: Method,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SideArg {
    A,
    B,
    Both,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "both")]
    pub side: SideArg,
    #[arg(long, value_parser = parse_grid, default_value = "0.02:0.72:0.02")]
    pub grid: Grid,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DiagnoseArgs {
    /// Covariance matrix CSV.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    #[serde(default)]
    pub header: bool,
    /// Built-in model instead of a file, e.g. `ar1:dim=400,rho=0.5`.
    #[arg(long, value_parser = parse_model)]
    pub model: Option<ModelSpec>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    /// A run_config.json from an earlier run.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

/// Ascending list of penalties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Grid(pub Vec<f64>);

impl Default for Grid {
    fn default() -> Self {
        Grid(default_grid())
    }
}

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    let values = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err("range grids look like start:stop:step".into());
        }
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err("range grid needs step > 0 and stop >= start".into());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // Rounded so that e.g. 0.02:0.72:0.02 yields 0.06, not 0.06000000000000001.
        (0..count)
            .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
            .collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() {
        return Err("grid is empty".into());
    }
    if values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err("grid must be strictly ascending".into());
    }
    Ok(Grid(values))
}

pub fn parse_method(s: &str) -> Result<Method, String> {
    match s {
        "gemini" => Ok(Method::Gemini),
        "nipff" | "ff" => Ok(Method::Nipff),
        _ => Err(format!("unknown method '{s}' (gemini, nipff)")),
    }
}

pub fn parse_solver(s: &str) -> Result<Solver, String> {
    match s {
        "glasso" => Ok(Solver::Glasso),
        "clime" => Ok(Solver::Clime),
        _ => Err(format!("unknown solver '{s}' (glasso, clime)")),
    }
}

pub fn parse_penalty_mode(s: &str) -> Result<PenaltyMode, String> {
    match s {
        "theory" => Ok(PenaltyMode::Theory),
        "explicit" => Ok(PenaltyMode::Explicit),
        "cv" => Ok(PenaltyMode::Cv),
        _ => Err(format!("unknown penalty mode '{s}' (theory, explicit, cv)")),
    }
}

/// `kind:key=value,...` with kinds `identity`, `ar1`, `star_block`, `random`.
pub fn parse_model(s: &str) -> Result<ModelSpec, String> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut dim = None;
    let mut kv = std::collections::BTreeMap::new();
    for item in rest.split(',').filter(|t| !t.trim().is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got '{item}'"))?;
        let v: f64 = v.trim().parse().map_err(|e| format!("{k}: {e}"))?;
        if k.trim() == "dim" {
            dim = Some(v);
        } else {
            kv.insert(k.trim().to_string(), v);
        }
    }
    let as_count = |v: f64, name: &str| -> Result<usize, String> {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(format!("{name} must be a non-negative integer"))
        }
    };
    let dim = as_count(dim.ok_or("model needs dim=<size>")?, "dim")?;
    let mut take = |k: &str, default: f64| kv.remove(k).unwrap_or(default);
    let spec = match kind.trim() {
        "identity" => ModelSpec::Identity { dim },
        "ar1" => ModelSpec::Ar1 { dim, rho: take("rho", 0.5) },
        "star_block" | "star" => ModelSpec::StarBlock {
            dim,
            blocks: as_count(take("blocks", 20.0), "blocks")?,
            leaves: as_count(take("leaves", 8.0), "leaves")?,
            rho: take("rho", 0.5),
        },
        "random" | "random_concentration" => ModelSpec::RandomConcentration {
            dim,
            edges: as_count(take("edges", dim as f64), "edges")?,
            w_min: take("w_min", 0.1),
            w_max: take("w_max", 0.3),
            base: take("base", 0.25),
        },
        other => return Err(format!("unknown model '{other}' (identity, ar1, star_block, random)")),
    };
    if let Some(k) = kv.keys().next() {
        return Err(format!("unknown parameter '{k}' for model '{kind}'"));
    }
    Ok(spec)
}
