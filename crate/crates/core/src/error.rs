use thiserror::Error;

use crate::estimators::SolveDiagnostics;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("group {group} out of range 1..={k}")]
    GroupOutOfRange { group: usize, k: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("weight at index {0} is not positive")]
    NonPositiveWeight(usize),

    #[error("infeasible estimate: {0}")]
    Infeasible(String),

    #[error("NPMLE did not converge after {} iterations (max Fenchel residual {:.3e})", .0.iterations, .0.max_fenchel_residual)]
    NotConverged(SolveDiagnostics),

    #[error("pooled increment below floor at t = {time} ({detail})")]
    DegenerateDenominator { time: f64, detail: String },

    #[error("degenerate covariance matrix")]
    DegenerateCovariance,

    #[error("degenerate variance")]
    DegenerateVariance,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
