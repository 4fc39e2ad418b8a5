use thiserror::Error;

/// Failure classes with their process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, out-of-domain parameters, unreadable inputs: exit 2.
    #[error("{0}")]
    Usage(String),
    /// Numerical or output failure: exit 1.
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Numeric(_) => 1,
        }
    }

    /// Errors while reading a user-supplied input are usage errors.
    pub fn input(path: &std::path::Path, err: palmfbm::Error) -> Self {
        Self::Usage(format!("{}: {err}", path.display()))
    }
}

impl From<palmfbm::Error> for CliError {
    fn from(e: palmfbm::Error) -> Self {
        use palmfbm::Error as E;
        match e {
            E::InvalidHurst(_)
            | E::InvalidArgument(_)
            | E::WindowTooSmall(_)
            | E::DegenerateEnsemble(_)
            | E::GridMismatch { .. }
            | E::Parse(_) => Self::Usage(e.to_string()),
            _ => Self::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Numeric(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Numeric(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
