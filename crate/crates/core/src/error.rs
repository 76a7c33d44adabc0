use thiserror::Error;

use crate::hilbert::QdState;

/// Errors raised by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("truncation n_max = {n_max} is too small: at least {required} photons per cavity are needed")]
    TruncationTooSmall { n_max: usize, required: usize },

    #[error("QD state {0:?} does not exist in this system")]
    UnknownQdState(QdState),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("design condition violated (residual {residual:.3e})")]
    ConditionViolated { residual: f64 },

    #[error("operators live on different Hilbert spaces")]
    SpaceMismatch,

    #[error("operator does not conserve the total excitation number (max |[H, N]| = {0:.3e})")]
    NotExcitationConserving(f64),

    #[error("root finder did not converge (best residual {best_residual:.3e})")]
    NoConvergence { best_residual: f64 },

    #[error("steady state not converged: max |L rho| = {residual:.3e}")]
    SteadyStateNotConverged { residual: f64 },

    #[error("linear solver breakdown: {0}")]
    LinearSolver(String),

    #[error("integration failed at t = {time:.6e}: {reason}")]
    IntegrationFailure { time: f64, reason: String },

    #[error("density-matrix invariant violated at t = {time:.6e}: {what}")]
    InvariantViolated { time: f64, what: String },

    #[error("tomography undefined: the state carries no {0}-photon weight")]
    NoPhotonWeight(usize),

    #[error("unsupported request: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite, got {value}")))
    }
}
