use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDigest {
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one command run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub command: String,
    pub config_sha256: String,
    pub started_utc: String,
    pub wall_clock_seconds: f64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let b = std::fs::read(path).map_err(|e| Error::data(path, e.to_string()))?;
    Ok(sha256_hex(&b))
}

impl Manifest {
    pub fn file_name(command: &str) -> String {
        format!("manifest_{command}.toml")
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = super::read_text(path)?;
        toml::from_str(&text).map_err(|e| Error::data(path, e.message().to_string()))
    }

    /// Digest recorded for `file` (an absolute or cwd-relative path under `root`).
    pub fn digest_of(&self, root: &Path, file: &Path) -> Option<&str> {
        let rel = file.strip_prefix(root).ok()?;
        self.outputs.iter().find(|d| d.path == rel).map(|d| d.sha256.as_str())
    }
}
