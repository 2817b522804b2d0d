//! Versioned model persistence.
//!
//! Layout: the 4-byte magic `SVSK`, a format version byte, a u32 little-
//! endian manifest length, the JSON manifest (parameter names, shapes and
//! the config hash), then each parameter's values as raw little-endian f64
//! blocks in manifest order.

use super::{Parameter, Tensor};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SVSK";
const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u8),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("config hash mismatch: checkpoint {found}, expected {expected}")]
    ConfigMismatch { found: String, expected: String },
    #[error("parameter set mismatch: {0}")]
    ParamMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    config_hash: String,
    params: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
}

/// Hex SHA-256 of a canonical config serialization.
pub fn config_hash(config_json: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(config_json.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save_checkpoint(
    path: &Path,
    params: &[&Parameter],
    config_hash: &str,
) -> Result<(), CheckpointError> {
    let manifest = Manifest {
        config_hash: config_hash.to_string(),
        params: params
            .iter()
            .map(|p| ManifestEntry { name: p.name.clone(), shape: p.tensor.shape().to_vec() })
            .collect(),
    };
    let manifest_json =
        serde_json::to_vec(&manifest).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&(manifest_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&manifest_json);
    for p in params {
        for v in p.tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

/// Load a checkpoint into an existing parameter set, verifying the config
/// hash, the parameter names and every shape.
pub fn load_checkpoint(
    path: &Path,
    params: Vec<&mut Parameter>,
    expected_config_hash: &str,
) -> Result<(), CheckpointError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 9 || &bytes[0..4] != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(CheckpointError::BadVersion(bytes[4]));
    }
    let mlen = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    if bytes.len() < 9 + mlen {
        return Err(CheckpointError::Corrupt("manifest truncated".into()));
    }
    let manifest: Manifest = serde_json::from_slice(&bytes[9..9 + mlen])
        .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    if manifest.config_hash != expected_config_hash {
        return Err(CheckpointError::ConfigMismatch {
            found: manifest.config_hash,
            expected: expected_config_hash.to_string(),
        });
    }
    if manifest.params.len() != params.len() {
        return Err(CheckpointError::ParamMismatch(format!(
            "checkpoint has {} parameters, model has {}",
            manifest.params.len(),
            params.len()
        )));
    }
    let mut offset = 9 + mlen;
    for (entry, param) in manifest.params.iter().zip(params) {
        if entry.name != param.name {
            return Err(CheckpointError::ParamMismatch(format!(
                "expected {}, checkpoint has {}",
                param.name, entry.name
            )));
        }
        if entry.shape != param.tensor.shape() {
            return Err(CheckpointError::ParamMismatch(format!(
                "{}: shape {:?} vs model {:?}",
                entry.name,
                entry.shape,
                param.tensor.shape()
            )));
        }
        let count: usize = entry.shape.iter().product();
        let end = offset + count * 8;
        if end > bytes.len() {
            return Err(CheckpointError::Corrupt(format!(
                "values truncated at parameter {}",
                entry.name
            )));
        }
        let data: Vec<f64> = bytes[offset..end]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        param.tensor = Tensor::from_vec(entry.shape.clone(), data);
        offset = end;
    }
    if offset != bytes.len() {
        return Err(CheckpointError::Corrupt("trailing bytes".into()));
    }
    Ok(())
}
