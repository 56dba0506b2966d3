use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("truncation loss {loss:.3e} at cutoff {dim} exceeds {limit:.1e}")]
    Truncation { loss: f64, dim: usize, limit: f64 },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:.3e})")]
    NotPositive { eigenvalue: f64 },

    #[error("density operator trace {trace} differs from 1")]
    NotNormalized { trace: f64 },

    #[error("cutoff mismatch: {left} vs {right}")]
    CutoffMismatch { left: usize, right: usize },

    #[error("finite-difference step did not converge: {0}")]
    StepSize(String),

    #[error("{0} did not converge")]
    NonConvergence(String),

    #[error("Fisher information diverges at zero strength")]
    DivergentFisher,

    #[error("singular Fisher matrix (determinant {det:.3e})")]
    SingularFisher { det: f64 },

    #[error("weak-limit precondition violated: {0}")]
    WeakLimit(String),

    #[error("target Fisher information {target:.6e} unreachable for mean photon number in [0, {limit}]")]
    Unreachable { target: f64, limit: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.to_string(), reason: reason.into() }
    }

    /// True for failures of a numerical procedure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Truncation { .. }
                | Error::NotPositive { .. }
                | Error::StepSize(_)
                | Error::NonConvergence(_)
                | Error::SingularFisher { .. }
                | Error::Unreachable { .. }
        )
    }
}
