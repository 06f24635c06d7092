use thiserror::Error;

use pct_core::ValidationReport;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("dataset failed validation:\n  {}", .0.errors.join("\n  "))]
    Invalid(ValidationReport),

    #[error(transparent)]
    Core(#[from] pct_core::Error),
}

impl CliError {
    /// 0 success, 1 validation failure, 2 usage/IO, 3 solver non-convergence,
    /// 4 degenerate statistics.
    pub fn exit_code(&self) -> i32 {
        use pct_core::Error as E;
        match self {
            CliError::Io { .. } | CliError::Csv { .. } | CliError::Format { .. } | CliError::Usage(_) => 2,
            CliError::Invalid(_) => 1,
            CliError::Core(e) => match e {
                E::EmptyDataset | E::InvalidDataset(_) | E::GroupOutOfRange { .. } => 1,
                E::NotConverged(_) => 3,
                E::DegenerateDenominator { .. } | E::DegenerateCovariance | E::DegenerateVariance => 4,
                E::Infeasible(_) => 3,
                E::LengthMismatch(..) | E::NonPositiveWeight(_) | E::InvalidArgument(_) => 2,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
