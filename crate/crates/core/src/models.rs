//! Ground-truth covariance and precision generators used in simulations.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spd_inverse;
use crate::matrix::SymMatrix;
use crate::precision::DEFAULT_EDGE_TOL;
use crate::rng::{RngSpec, MODEL_SLOT};

/// A generator and its parameters. `dim` is the side length of the matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Identity {
        dim: usize,
    },
    Ar1 {
        dim: usize,
        rho: f64,
    },
    StarBlock {
        dim: usize,
        blocks: usize,
        leaves: usize,
        rho: f64,
    },
    RandomConcentration {
        dim: usize,
        edges: usize,
        w_min: f64,
        w_max: f64,
        base: f64,
    },
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        match *self {
            ModelSpec::Identity { dim }
            | ModelSpec::Ar1 { dim, .. }
            | ModelSpec::StarBlock { dim, .. }
            | ModelSpec::RandomConcentration { dim, .. } => dim,
        }
    }

    /// Builds the model. Random models read the stream `(trial, MODEL_SLOT)`.
    pub fn generate(&self, rng: &RngSpec, trial: u32) -> Result<GroundTruth> {
        match *self {
            ModelSpec::Identity { dim } => identity(dim),
            ModelSpec::Ar1 { dim, rho } => ar1(dim, rho),
            ModelSpec::StarBlock { dim, blocks, leaves, rho } => star_block(dim, blocks, leaves, rho),
            ModelSpec::RandomConcentration {
                dim,
                edges,
                w_min,
                w_max,
                base,
            } => random_concentration(dim, edges, w_min, w_max, base, &mut rng.stream(trial, MODEL_SLOT)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub covariance: SymMatrix,
    pub precision: SymMatrix,
    /// Off-diagonal support of the precision, `(i, j)` with `i < j`, sorted.
    pub edges: Vec<(usize, usize)>,
    pub spec: ModelSpec,
}

pub fn identity(dim: usize) -> Result<GroundTruth> {
    if dim == 0 {
        return Err(Error::DimensionTooSmall { dim, needed: 1 });
    }
    Ok(GroundTruth {
        covariance: SymMatrix::identity(dim),
        precision: SymMatrix::identity(dim),
        edges: vec![],
        spec: ModelSpec::Identity { dim },
    })
}

/// AR(1): `A_ij = ρ^{|i-j|}`, with the tridiagonal inverse in closed form.
pub fn ar1(m: usize, rho: f64) -> Result<GroundTruth> {
    if m < 2 {
        return Err(Error::DimensionTooSmall { dim: m, needed: 2 });
    }
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("AR(1) needs |rho| < 1, got {rho}")));
    }
    let covariance = SymMatrix::from_upper_fn(m, |i, j| rho.powi((j - i) as i32));
    let denom = 1.0 - rho * rho;
    let precision = SymMatrix::from_upper_fn(m, |i, j| {
        if i == j {
            if i == 0 || i == m - 1 {
                1.0 / denom
            } else {
                (1.0 + rho * rho) / denom
            }
        } else if j == i + 1 {
            -rho / denom
        } else {
            0.0
        }
    });
    let edges = if rho == 0.0 { vec![] } else { (0..m - 1).map(|i| (i, i + 1)).collect() };
    Ok(GroundTruth {
        covariance,
        precision,
        edges,
        spec: ModelSpec::Ar1 { dim: m, rho },
    })
}

/// Block-diagonal star covariance. Each block is a hub (first index of the
/// block) and `leaves` leaves with `S = ρ` on hub–leaf pairs and `ρ²` between
/// leaves. Blocks fill indices from 0 contiguously; the remaining nodes are
/// singletons.
pub fn star_block(m: usize, blocks: usize, leaves: usize, rho: f64) -> Result<GroundTruth> {
    let size = leaves + 1;
    let needed = blocks * size;
    if m < needed || m == 0 {
        return Err(Error::DimensionTooSmall { dim: m, needed: needed.max(1) });
    }
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("star block needs |rho| < 1, got {rho}")));
    }
    let block_of = |i: usize| if i < needed { Some(i / size) } else { None };
    let covariance = SymMatrix::from_upper_fn(m, |i, j| {
        if i == j {
            return 1.0;
        }
        match (block_of(i), block_of(j)) {
            (Some(bi), Some(bj)) if bi == bj => {
                if i % size == 0 || j % size == 0 {
                    rho
                } else {
                    rho * rho
                }
            }
            _ => 0.0,
        }
    });
    let precision = spd_inverse(&covariance)?;
    let mut edges = Vec::new();
    if rho != 0.0 {
        for b in 0..blocks {
            let hub = b * size;
            edges.extend((1..size).map(|l| (hub, hub + l)));
        }
    }
    Ok(GroundTruth {
        covariance,
        precision,
        edges,
        spec: ModelSpec::StarBlock { dim: m, blocks, leaves, rho },
    })
}

/// Maps a linear index over the strict upper triangle to `(i, j)`, row by row.
fn pair_from_index(f: usize, mut k: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = f - 1 - i;
        if k < row {
            return (i, i + 1 + k);
        }
        k -= row;
        i += 1;
    }
}

/// Random concentration matrix: start from `base·I`, pick `d` distinct pairs
/// uniformly, and for each pair with weight `w ~ U[w_min, w_max]` subtract `w`
/// from `π_ij, π_ji` and add it to `π_ii, π_jj`.
pub fn random_concentration<R: Rng + ?Sized>(
    f: usize,
    d: usize,
    w_min: f64,
    w_max: f64,
    base: f64,
    rng: &mut R,
) -> Result<GroundTruth> {
    if f == 0 {
        return Err(Error::DimensionTooSmall { dim: f, needed: 1 });
    }
    if !(w_min > 0.0 && w_min <= w_max && w_max.is_finite()) {
        return Err(Error::InvalidParameter(format!("need 0 < w_min <= w_max, got [{w_min}, {w_max}]")));
    }
    if !(base > 0.0) {
        return Err(Error::InvalidParameter(format!("base must be positive, got {base}")));
    }
    let available = f * (f - 1) / 2;
    if d > available {
        return Err(Error::TooManyEdges { requested: d, available });
    }
    let picks: Vec<(usize, usize)> = index::sample(rng, available, d)
        .into_iter()
        .map(|k| pair_from_index(f, k))
        .collect();
    let mut pi = nalgebra::DMatrix::identity(f, f) * base;
    for &(i, j) in &picks {
        let w = if w_min == w_max { w_min } else { rng.gen_range(w_min..=w_max) };
        pi[(i, j)] -= w;
        pi[(j, i)] -= w;
        pi[(i, i)] += w;
        pi[(j, j)] += w;
    }
    let precision = SymMatrix::symmetrized(pi);
    let covariance = spd_inverse(&precision)?;
    let mut edges = picks;
    edges.sort_unstable();
    Ok(GroundTruth {
        covariance,
        precision,
        edges,
        spec: ModelSpec::RandomConcentration {
            dim: f,
            edges: d,
            w_min,
            w_max,
            base,
        },
    })
}

impl GroundTruth {
    /// Edge set read off the precision matrix at `tol`.
    pub fn numeric_edges(&self, tol: f64) -> Vec<(usize, usize)> {
        self.precision.off_diagonal_support(tol)
    }

    pub fn numeric_edges_default(&self) -> Vec<(usize, usize)> {
        self.numeric_edges(DEFAULT_EDGE_TOL)
    }
}
