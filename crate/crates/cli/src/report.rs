use std::path::Path;

use serde::{Deserialize, Serialize};

use pct_core::hypothesis::TestReport;
use pct_core::IcmConfig;

use crate::error::{CliError, Result};

/// Output of `pct test`: the test reports plus an echo of the run settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub input: String,
    pub weight: String,
    pub stat: String,
    pub alpha: f64,
    pub icm: IcmConfig,
    pub tests: Vec<TestReport>,
}

impl ReportFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serialisable")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: name.clone(), source })?;
        Self::from_json(&text).map_err(|e| CliError::Format { path: name, message: e.to_string() })
    }
}
