use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("integrand returned NaN at y_j = {at}")]
    Evaluation { at: f64 },

    #[error("root refinement did not converge in bracket [{lo}, {hi}]")]
    RootRefinement { lo: f64, hi: f64 },

    #[error("bracket expansion failed from {from} (direction {direction})")]
    BracketExpansion { from: f64, direction: f64 },

    #[error("function is not convex along the axis: second derivative {d2} at {at}")]
    ConvexityViolation { at: f64, d2: f64 },

    #[error("quadrature did not reach tolerance: estimate {estimate}, error bound {error}")]
    Accuracy { estimate: f64, error: f64 },

    #[error("gradient along the probe direction vanishes at the critical point")]
    OrthogonalGradient,

    #[error("level-point search left the neighbourhood of the critical point: {0}")]
    OutOfNeighborhood(String),

    #[error("requested dimension {requested} exceeds available {available}")]
    DimensionOverflow { requested: usize, available: usize },

    #[error("non-finite integrand value at shift {shift}, point {index}")]
    PoisonedEvaluation { shift: usize, index: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("degenerate regression: {0}")]
    Regression(String),

    #[error("covariance factorization failed: {0}")]
    Factorization(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by bad input or configuration rather than a
    /// numerical failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Unsupported(_)
                | Error::Config(_)
                | Error::DimensionOverflow { .. }
                | Error::Parse { .. }
        )
    }
}
