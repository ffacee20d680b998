use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dppl_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Invalid(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{0}")]
    NonConvergence(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 0 success, 2 invalid input, 3 non-convergence, 4 instance too large.
    pub fn exit_code(&self) -> i32 {
        use dppl_core::Error as E;
        match self {
            Self::Core(E::NonConvergence { .. }) | Self::NonConvergence(_) => 3,
            Self::Core(E::InstanceTooLarge { .. }) => 4,
            Self::Core(E::NumericalDegeneracy(_)) | Self::Core(E::InfeasibleSubproblem(_)) => 1,
            Self::Core(_) | Self::Io { .. } | Self::Invalid(_) | Self::Parse { .. } => 2,
        }
    }
}
