//! Run manifest written next to every command's outputs.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::io::write_json;
use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_sha256: String,
    pub version: String,
    pub seed: u64,
    /// Unix seconds; taken from `SOURCE_DATE_EPOCH` when set so reruns are reproducible.
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<OutputFile>,
}

/// Seconds since the epoch, honouring `SOURCE_DATE_EPOCH`.
pub fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn file_entry(out_dir: &Path, path: &Path) -> Result<OutputFile, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let rel = path.strip_prefix(out_dir).unwrap_or(path);
    Ok(OutputFile { path: rel.display().to_string(), sha256: hex::encode(Sha256::digest(&bytes)), bytes: bytes.len() as u64 })
}

impl RunManifest {
    pub fn write(command: &str, config_sha256: String, seed: u64, started: u64, out_dir: &Path, outputs: &[PathBuf]) -> Result<PathBuf, CliError> {
        let manifest = RunManifest {
            command: command.to_string(),
            config_sha256,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            started_unix: started,
            finished_unix: timestamp(),
            outputs: outputs.iter().map(|p| file_entry(out_dir, p)).collect::<Result<_, _>>()?,
        };
        let path = out_dir.join(MANIFEST_NAME);
        write_json(&path, &manifest)?;
        Ok(path)
    }
}
