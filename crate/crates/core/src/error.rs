use thiserror::Error;

use crate::solver::BarycenterResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A user-supplied value violates a precondition. `field` names the offending input.
    #[error("invalid {field}: {reason}")]
    InvalidInput { field: String, reason: String },

    #[error("shifted density leaks {leaked:.3e} mass outside the domain")]
    SupportOverflow { leaked: f64 },

    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    #[error("infeasible transport problem: {0}")]
    Infeasible(String),

    #[error("transport problem too large: {sources} x {sinks} exceeds the {limit}-point limit")]
    SizeOverflow {
        sources: usize,
        sinks: usize,
        limit: usize,
    },

    /// Picard iteration hit its budget. The best iterate is attached and flagged non-converged.
    #[error("barycenter iteration did not converge after {} iterations (residual {:.3e})", .result.iterations, .result.final_residual)]
    NotConverged { result: Box<BarycenterResult> },

    #[error("fixed-point iteration diverged: {0}")]
    Divergence(String),

    #[error("ill-conditioned operator: {0}")]
    IllConditioned(String),

    #[error("potential is not strictly convex: {0}")]
    NonConvexPotential(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
