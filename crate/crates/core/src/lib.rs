//! Gemini estimators and the noniterative penalized flip-flop algorithm for
//! matrix-variate normal data with Kronecker covariance `A ⊗ B`.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clime;
pub mod correlation;
pub mod csvio;
pub mod error;
pub mod evaluation;
pub mod flipflop;
pub mod gemini;
pub mod glasso;
pub mod linalg;
pub mod matrix;
pub mod models;
pub mod precision;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use matrix::{DataSet, SymMatrix};

/// Version tag written into every serialized report and manifest.
pub const SCHEMA_VERSION: u32 = 1;
