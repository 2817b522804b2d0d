//! Feature dumps: flat little-endian f32 binary plus a JSON sidecar.

use super::DspError;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Linear,
    Mel,
    Bfcc,
    F0,
    Pitch,
}

/// Sidecar describing a feature dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub rows: usize,
    pub cols: usize,
    pub kind: FeatureKind,
}

fn sidecar_path(bin: &Path) -> PathBuf {
    let mut os = bin.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

/// Write `rows * cols` values as f32 LE at `path`, sidecar at `path`.json.
pub fn write_features(
    path: &Path,
    data: &[f64],
    rows: usize,
    cols: usize,
    kind: FeatureKind,
) -> Result<(), DspError> {
    if data.len() != rows * cols {
        return Err(DspError::FeatureDump(format!(
            "data length {} does not match {rows}x{cols}",
            data.len()
        )));
    }
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for v in data {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&bytes)?;
    let sidecar = FeatureSidecar { rows, cols, kind };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| DspError::FeatureDump(e.to_string()))?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

/// Read a dump written by [`write_features`].
pub fn read_features(path: &Path) -> Result<(FeatureSidecar, Vec<f64>), DspError> {
    let json = std::fs::read_to_string(sidecar_path(path))?;
    let sidecar: FeatureSidecar =
        serde_json::from_str(&json).map_err(|e| DspError::FeatureDump(e.to_string()))?;
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() != sidecar.rows * sidecar.cols * 4 {
        return Err(DspError::FeatureDump(format!(
            "{} holds {} bytes, sidecar says {}x{}",
            path.display(),
            bytes.len(),
            sidecar.rows,
            sidecar.cols
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    Ok((sidecar, data))
}
