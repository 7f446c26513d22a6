//! The TOML configuration file. Every section is optional; command-line
//! flags override the file.
//!
//! ```toml
//! jobs = 4
//!
//! [detector]
//! ref_gap_factor = 1.6
//! min_score = 0.25
//!
//! [pipeline]
//! default_ocr = "tesseract"
//!
//! [pipeline.ocr.tesseract]
//! program = "tesseract"
//! args = ["{input}", "stdout", "--psm", "6"]
//!
//! [service]
//! bind = "127.0.0.1:8080"
//! data_dir = "refscan-data"
//! workers = 2
//! users = { alice = "secret" }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use refscan_core::detector::DetectorConfig;
use refscan_core::pipelines::PipelineConfig;
use refscan_service::ServiceConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSection {
    pub bind: String,
    pub data_dir: PathBuf,
    pub workers: usize,
    pub users: BTreeMap<String, String>,
    pub max_upload_bytes: usize,
}

impl Default for ServiceSection {
    fn default() -> Self {
        let base = ServiceConfig::default();
        Self {
            bind: DEFAULT_BIND.into(),
            data_dir: base.data_dir,
            workers: base.workers,
            users: base.users,
            max_upload_bytes: base.max_upload_bytes,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    /// Page-level worker threads; all cores when absent.
    pub jobs: Option<usize>,
    pub detector: DetectorConfig,
    pub pipeline: PipelineConfig,
    pub service: ServiceSection,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn service_config(&self) -> ServiceConfig {
        ServiceConfig {
            data_dir: self.service.data_dir.clone(),
            workers: self.service.workers,
            users: self.service.users.clone(),
            max_upload_bytes: self.service.max_upload_bytes,
            pipeline: self.pipeline.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_example_parses() {
        let src = include_str!("config.rs");
        let example: String = src
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start())
            .collect::<Vec<_>>()
            .join("\n");
        let cfg: CliConfig = toml::from_str(&example).unwrap();
        assert_eq!(cfg.jobs, Some(4));
        assert_eq!(cfg.service.users["alice"], "secret");
        assert_eq!(cfg.pipeline.ocr["tesseract"].args[0], "{input}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<CliConfig>("[detector]\nbogus = 1").is_err());
        assert_eq!(toml::from_str::<CliConfig>("").unwrap(), CliConfig::default());
    }
}
