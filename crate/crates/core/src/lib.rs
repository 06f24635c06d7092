//! Nonparametric k-sample comparison of counting processes observed as panel
//! count data.
//!
//! The mean function of each group and of the pooled sample is estimated by
//! nonparametric maximum likelihood; weighted statistics built from the ratios
//! of their increments are referred to normal or chi-square limits.

pub mod data;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod hypothesis;
mod linalg;
pub mod simulation;
pub mod weights;

pub use data::{
    build_time_grid, eval_step, restrict_to_group, validate_dataset, ObservationPath, PanelDataset,
    StepEstimate, TimeGrid, ValidationReport,
};
pub use error::{Error, Result};
pub use estimators::{npmle, npmple, IcmConfig, SolveDiagnostics};
pub use weights::{make_weight, risk_fraction, WeightFn, WeightSpec};
