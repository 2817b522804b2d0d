//! Run manifests: every artifact under `runs/<name>/` traces back to the
//! config and input hashes recorded here.

use crate::CliError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_name: String,
    pub config_hash: String,
    /// Content hashes of the inputs, keyed by a stable label.
    pub input_hashes: BTreeMap<String, String>,
    pub created_unix: u64,
    pub artifacts: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(run_name: &str, config_hash: &str) -> Self {
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            run_name: run_name.to_string(),
            config_hash: config_hash.to_string(),
            input_hashes: BTreeMap::new(),
            created_unix,
            artifacts: Vec::new(),
        }
    }

    pub fn hash_input(&mut self, label: &str, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path)?;
        self.input_hashes.insert(label.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn record_artifact(&mut self, relative: &str) {
        self.artifacts.push(relative.to_string());
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
