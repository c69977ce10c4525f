//! Per-stage run manifests used to skip stages whose inputs have not changed.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use psi_core::fsutil::{file_digest, sha256_hex, write_atomic};
use serde::{Deserialize, Serialize};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(FileDigest {
            path: path.to_path_buf(),
            sha256: file_digest(path).with_context(|| format!("hashing {}", path.display()))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: String,
    pub tool_version: String,
    pub config_digest: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_at: u64,
    pub finished_at: u64,
}

pub fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Digest of the stage-relevant configuration, serialized as JSON.
pub fn config_digest<T: Serialize>(stage_config: &T) -> String {
    let json = serde_json::to_string(stage_config).expect("config serializes");
    sha256_hex(json.as_bytes())
}

pub fn manifest_path(output_dir: &Path, stage: &str) -> PathBuf {
    output_dir.join("manifests").join(format!("{stage}.json"))
}

pub fn digest_inputs(paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
    paths.iter().map(|p| FileDigest::of(p)).collect()
}

/// True when a previous run recorded the same inputs and config and every
/// output is still on disk unchanged.
pub fn is_up_to_date(output_dir: &Path, stage: &str, config_digest: &str, inputs: &[FileDigest]) -> bool {
    let Ok(text) = std::fs::read_to_string(manifest_path(output_dir, stage)) else {
        return false;
    };
    let Ok(m) = serde_json::from_str::<RunManifest>(&text) else {
        return false;
    };
    m.tool_version == TOOL_VERSION
        && m.config_digest == config_digest
        && m.inputs == inputs
        && m.outputs
            .iter()
            .all(|o| file_digest(&o.path).is_ok_and(|d| d == o.sha256))
}

pub fn write_manifest(
    output_dir: &Path,
    stage: &str,
    config_digest: String,
    inputs: Vec<FileDigest>,
    outputs: &[PathBuf],
    started_at: u64,
) -> Result<()> {
    let manifest = RunManifest {
        stage: stage.to_string(),
        tool_version: TOOL_VERSION.to_string(),
        config_digest,
        inputs,
        outputs: digest_inputs(outputs)?,
        started_at,
        finished_at: now(),
    };
    let path = manifest_path(output_dir, stage);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_atomic(&path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}
