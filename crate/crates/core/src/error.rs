use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("constraint level u = {u} is infeasible on this grid (largest attainable value {max})")]
    Infeasible { u: f64, max: f64 },

    #[error("{what} did not converge: {detail}")]
    NonConvergence { what: &'static str, detail: String },

    #[error("Stieltjes transform left the upper half-plane at lambda = {lambda}, eta = {eta}")]
    HerglotzViolation { lambda: f64, eta: f64 },

    #[error("quadrature refinement changed the estimate by {rel_gap:.3e} (relative), above tolerance {tol:.1e}")]
    QuadratureGap { rel_gap: f64, tol: f64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Non-convergence and numerical breakdowns map to a distinct CLI exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::HerglotzViolation { .. }
                | Error::QuadratureGap { .. }
                | Error::Consistency(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
