//! File formats and subcommands of the `pct` tool.

pub mod commands;
pub mod dataset;
pub mod error;
pub mod report;

pub use dataset::{read_dataset, read_dataset_from, write_dataset_to};
pub use error::{CliError, Result};
pub use report::ReportFile;
