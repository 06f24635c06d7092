//! Estimators of the mean function: the NPMPLE (isotonic regression of mean
//! counts) and the NPMLE (modified ICM), plus optimality certificates.

mod certificates;
mod icm;
mod isotonic;
mod likelihood;

pub use certificates::{
    d1_distance, lemma1_residual, pseudo_score_residual, stationarity, StationarityCertificate,
};
pub use icm::{npmle, IcmConfig, SolveDiagnostics};
pub use isotonic::isotonic_regression;
pub use likelihood::{gradient_and_curvature, log_likelihood, npmple};
