use std::fmt;

use sparsact::Error;

/// A failure together with the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Malformed or invalid input; exit code 1.
    Input(anyhow::Error),
    /// A solver gave up; exit code 2.
    NonConvergence(anyhow::Error),
    /// Anything else; exit code 3.
    Internal(anyhow::Error),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(anyhow::anyhow!(msg.into()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::NonConvergence(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(e) => write!(f, "input error: {e:#}"),
            CliError::NonConvergence(e) => write!(f, "solver did not converge: {e:#}"),
            CliError::Internal(e) => write!(f, "internal error: {e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::DimensionMismatch { .. }
            | Error::SingularOperator { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::NotHermitian { .. }
            | Error::NonFinite { .. }
            | Error::NonStabilizable(_)
            | Error::NonObservable(_)
            | Error::InvalidInput(_) => CliError::Input(e.into()),
            Error::MaxBacktracks { .. } | Error::EigenNonConvergence(_) | Error::PolishInfeasible(_) | Error::InnerSolver { .. } => {
                CliError::NonConvergence(e.into())
            }
            Error::InfeasibleY | Error::BoundUnavailable(_) | Error::Internal(_) => CliError::Internal(e.into()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.into())
    }
}
