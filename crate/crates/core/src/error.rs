use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive semi-definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is not positive definite")]
    NotPd,

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("explicit materialization of a {rows}x{rows} matrix exceeds the guard of {guard}")]
    DimensionGuard { rows: usize, guard: usize },

    #[error("column {0} has zero pooled norm")]
    DegenerateColumn(usize),

    #[error("row {0} has zero pooled norm")]
    DegenerateRow(usize),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("clime column {column} did not converge after {iterations} pivots")]
    ColumnNotConverged { column: usize, iterations: usize },

    #[error("clime column {column} is infeasible at this penalty")]
    ColumnInfeasible { column: usize },

    #[error("singular input: lambda = 0 requires a positive definite correlation matrix")]
    SingularInput,

    #[error("invalid edge ({0}, {1}) for {2} nodes")]
    InvalidEdge(usize, usize, usize),

    #[error("truth matrix has zero norm")]
    ZeroTruth,

    #[error("requested {requested} edges but only {available} node pairs exist")]
    TooManyEdges { requested: usize, available: usize },

    #[error("dimension {dim} too small: need at least {needed}")]
    DimensionTooSmall { dim: usize, needed: usize },

    #[error("cannot split {available} slices into {folds} folds")]
    FoldTooSmall { available: usize, folds: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("flip-flop step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors that come from bad input or configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        if let Error::Step { source, .. } = self {
            return source.is_config();
        }
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::DimensionGuard { .. }
                | Error::InvalidEdge(..)
                | Error::TooManyEdges { .. }
                | Error::DimensionTooSmall { .. }
                | Error::FoldTooSmall { .. }
                | Error::InvalidParameter(_)
                | Error::Parse(_)
        )
    }

    pub fn is_io(&self) -> bool {
        if let Error::Step { source, .. } = self {
            return source.is_io();
        }
        matches!(self, Error::Io(_) | Error::Csv(_) | Error::Json(_))
    }

    pub(crate) fn at_step(self, step: usize) -> Error {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }
}
