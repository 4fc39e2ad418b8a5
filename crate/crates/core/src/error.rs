use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Hurst index must lie strictly inside (0, 1), got {0}")]
    InvalidHurst(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("circulant embedding has eigenvalue {min:e} below -{tolerance:e}")]
    NegativeEigenvalue { min: f64, tolerance: f64 },

    #[error("covariance matrix is not numerically positive semidefinite (jitter {jitter:e})")]
    FactorizationFailure { jitter: f64 },

    #[error("window too small: {0}")]
    WindowTooSmall(String),

    #[error("need at least 2 realizations, got {0}")]
    DegenerateEnsemble(usize),

    #[error("regression needs at least 3 points, got {0}")]
    InsufficientData(usize),

    #[error("variance at r = {radius} is not positive ({variance})")]
    NonpositiveVariance { radius: f64, variance: f64 },

    #[error("lattice sum at t = {t} needs more than {cap} terms")]
    TruncationTooLarge { t: f64, cap: u64 },

    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),

    #[error("t = {t} is not on the dual grid 2*pi*k/{length}")]
    GridMismatch { t: f64, length: f64 },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
