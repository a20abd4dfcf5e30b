use thiserror::Error;

/// Errors raised by scorecard construction, statistics, and the QP solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),

    #[error("x = {x} outside spline domain [{low}, {high}]")]
    OutOfDomain { x: f64, low: f64, high: f64 },

    #[error("invalid spline order {0}; expected 1..=4")]
    InvalidOrder(u8),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("coefficient index {index} out of range for p = {p} (0-based)")]
    IndexOutOfRange { index: usize, p: usize },

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("class '{0}' has fewer than 2 records; covariance is undefined")]
    DegenerateClass(String),

    #[error("pooled score variance is zero; divergence undefined")]
    ZeroVariance,

    #[error("negative penalty weight {0}")]
    NegativeWeight(f64),

    #[error("H is not positive semidefinite (shifted factorization failed)")]
    NotPsd,

    #[error("H is not symmetric: max |H - H'| entry = {0:e}")]
    NotSymmetric(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("constraints are infeasible: {0}")]
    Infeasible(String),

    #[error("invalid scorecard specification: {0}")]
    InvalidSpec(String),

    #[error(
        "record {row}: value {value} for characteristic '{characteristic}' \
         matches no special value, bin, or liquid domain"
    )]
    UnmatchedValue {
        row: usize,
        value: f64,
        characteristic: String,
    },

    #[error("column '{0}' not found in input data")]
    MissingColumn(String),

    #[error("{stage}: {source}")]
    Stage {
        /// Pipeline stage that failed (e.g. "divergence_stats(dev)").
        stage: &'static str,
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub(crate) fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, unwrapping stage annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
