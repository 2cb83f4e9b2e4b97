use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gemini_core::csvio::{read_edges, read_matrix, read_sym_matrix};
use gemini_core::models::ModelSpec;
use gemini_core::{DataSet, SymMatrix, SCHEMA_VERSION};
use serde::{Deserialize, Serialize};

use crate::args::DataArgs;

/// Index of a simulated data directory. Paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub f: usize,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub header: bool,
    pub replicates: Vec<String>,
    pub truth: Option<TruthFiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFiles {
    pub model_a: ModelSpec,
    pub model_b: ModelSpec,
    pub a_cov: String,
    pub a_prec: String,
    pub a_edges: String,
    pub b_cov: String,
    pub b_prec: String,
    pub b_edges: String,
}

pub struct Truth {
    pub a_cov: SymMatrix,
    pub a_prec: SymMatrix,
    pub a_edges: Vec<(usize, usize)>,
    pub b_prec: SymMatrix,
    pub b_edges: Vec<(usize, usize)>,
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let manifest: Manifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if manifest.schema_version != SCHEMA_VERSION {
        bail!("unsupported manifest schema version {}", manifest.schema_version);
    }
    Ok(manifest)
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Loads replicates from a manifest or a file list, checking the manifest's
/// recorded dimensions.
pub fn load_data(args: &DataArgs) -> Result<(DataSet, Option<(Manifest, PathBuf)>)> {
    if let Some(path) = &args.manifest {
        let manifest = read_manifest(path)?;
        let dir = base_dir(path);
        let reps = manifest
            .replicates
            .iter()
            .map(|r| read_matrix(&dir.join(r), manifest.header).with_context(|| format!("reading replicate {r}")))
            .collect::<Result<Vec<_>>>()?;
        let data = DataSet::new(reps)?;
        if (data.f(), data.m(), data.n()) != (manifest.f, manifest.m, manifest.n) {
            bail!(
                "manifest says {}x{} with n = {}, files hold {}x{} with n = {}",
                manifest.f,
                manifest.m,
                manifest.n,
                data.f(),
                data.m(),
                data.n()
            );
        }
        Ok((data, Some((manifest, dir))))
    } else if !args.input.is_empty() {
        let reps = args
            .input
            .iter()
            .map(|p| read_matrix(p, args.header).with_context(|| format!("reading {}", p.display())))
            .collect::<Result<Vec<_>>>()?;
        Ok((DataSet::new(reps)?, None))
    } else {
        bail!("give either --manifest or --input")
    }
}

pub fn load_truth(manifest: &Manifest, dir: &Path) -> Result<Truth> {
    let files = manifest.truth.as_ref().context("manifest lists no ground truth")?;
    let edges = |name: &str| -> Result<Vec<(usize, usize)>> {
        Ok(read_edges(&dir.join(name))?.into_iter().map(|(i, j, _)| (i, j)).collect())
    };
    Ok(Truth {
        a_cov: read_sym_matrix(&dir.join(&files.a_cov), false)?,
        a_prec: read_sym_matrix(&dir.join(&files.a_prec), false)?,
        a_edges: edges(&files.a_edges)?,
        b_prec: read_sym_matrix(&dir.join(&files.b_prec), false)?,
        b_edges: edges(&files.b_edges)?,
    })
}
