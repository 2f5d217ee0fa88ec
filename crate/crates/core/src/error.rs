use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("out of regime: {0}")]
    OutOfRegime(String),
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),
    #[error(
        "no population spectrum for {0}: sample preconditioners converge to the gradient \
         descent interpolant, use Identity instead"
    )]
    NoPopulationSpectrum(String),
    #[error("{op}: solver did not converge (last residual {residual:e})")]
    NonConvergence { op: &'static str, residual: f64 },
    #[error("{op}: {detail}")]
    Numerical { op: &'static str, detail: String },
    #[error("step size must satisfy 0 < eta < 1, got {0}")]
    StepSize(f64),
    #[error("damping must be positive, got {0}")]
    Damping(f64),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Numerical { op, detail: detail.into() }
    }

    /// True for failures of a numerical routine, as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonConvergence { .. } | Error::Numerical { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
