use std::collections::BTreeMap;
use std::path::PathBuf;

use refscan_core::pipelines::PipelineConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// Job records, uploads and artifacts.
    pub data_dir: PathBuf,
    pub workers: usize,
    /// User name to password.
    pub users: BTreeMap<String, String>,
    pub max_upload_bytes: usize,
    pub pipeline: PipelineConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("refscan-data"),
            workers: 2,
            users: BTreeMap::new(),
            max_upload_bytes: 64 << 20,
            pipeline: PipelineConfig::default(),
        }
    }
}
