use std::path::PathBuf;

use thiserror::Error;

use crate::tnewton::SolveTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in `{operand}`: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        operand: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("matrix `{operand}` is not symmetric: entry ({row}, {col}) has no matching transpose")]
    NotSymmetric {
        operand: String,
        row: usize,
        col: usize,
    },

    #[error("matrix `{operand}` is not positive definite: {detail}")]
    NotPositiveDefinite { operand: String, detail: String },

    #[error("zero right-hand side")]
    ZeroRightHandSide,

    #[error("dense computation requested for n = {n}, above the dense limit {limit}")]
    DenseLimitExceeded { n: usize, limit: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("factor is rank deficient (Gram matrix YᵀY is not positive definite)")]
    RankDeficient,

    #[error("retraction left the manifold (step {step:e})")]
    RetractionLeftManifold { step: f64 },

    #[error("tangent vector was built for metric {found:?}, but metric {expected:?} was requested")]
    MetricMismatch {
        expected: crate::manifold::MetricChoice,
        found: crate::manifold::MetricChoice,
    },

    #[error("non-finite value in {context} at inner iteration {inner_index}")]
    NonFinite {
        context: &'static str,
        inner_index: usize,
    },

    #[error("direction is not a descent direction (slope {slope:e} >= 0)")]
    NotDescent { slope: f64 },

    #[error(
        "line search failed after {backtracks} backtracks (last step {last_step:e}, slope {slope:e}, last change {last_change:e})"
    )]
    LineSearchFailed {
        backtracks: usize,
        last_step: f64,
        slope: f64,
        last_change: f64,
    },

    #[error("preconditioner failed: {0}; fall back to the identity preconditioner")]
    Preconditioner(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solve failed at rank {rank}: {source}")]
    RankSolveFailed {
        rank: usize,
        #[source]
        source: Box<Error>,
        partial_trace: Box<SolveTrace>,
    },
}

impl Error {
    pub(crate) fn dims(
        operand: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    ) -> Self {
        Error::DimensionMismatch {
            operand,
            expected,
            found,
        }
    }
}
