use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use gcpr::model::ModelSpec;
use gcpr::siminf::SimConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub path: String,
    pub sha256: String,
}

impl DatasetRef {
    pub fn of(path: &Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        Ok(Self {
            path: path.display().to_string(),
            sha256: format!("{:x}", Sha256::digest(&bytes)),
        })
    }
}

/// Everything needed to reproduce an output. `argv` replays the command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub argv: Vec<String>,
    pub dataset: Option<DatasetRef>,
    pub spec: Option<ModelSpec>,
    pub sim_config: Option<SimConfig>,
    pub q_grid: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str, argv: Vec<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            argv,
            dataset: None,
            spec: None,
            sim_config: None,
            q_grid: None,
            seed: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// One-line `# manifest: {...}` header for CSV and text outputs.
    pub fn comment_line(&self) -> String {
        format!(
            "# manifest: {}\n",
            serde_json::to_string(self).expect("manifest serializes")
        )
    }
}
