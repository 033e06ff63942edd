use thiserror::Error;

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or inconsistent configuration. Exit code 1.
    #[error("configuration error: {0}")]
    Config(String),
    /// A checked property does not hold. Exit code 2.
    #[error("property violation: {0}")]
    Violation(String),
    /// A numerical routine failed. Exit code 3.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Violation(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<tiltprior::Error> for CliError {
    fn from(e: tiltprior::Error) -> Self {
        use tiltprior::Error as E;
        match e {
            E::InvalidArgument(_)
            | E::InvalidHyper(_)
            | E::DimensionMismatch { .. }
            | E::DimensionTooHigh { .. }
            | E::NotUnivariate { .. }
            | E::NotMultivariate
            | E::DiscreteData
            | E::RatioUndefined
            | E::NotComparable(_)
            | E::MembershipViolation { .. }
            | E::Data(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
