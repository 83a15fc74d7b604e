//! Files: run configuration, checkpoints, manifests, observation tables and plots.

mod checkpoint;
mod config;
mod manifest;
mod obsfile;
pub mod plot;

use std::path::Path;

pub use checkpoint::Checkpoint;
pub use config::{
    ExperimentSection, InputsSection, ModelsConfig, ObsSection, RunConfig, TrainingSection, TruthSection,
};
pub use manifest::{sha256_file, sha256_hex, FileDigest, Manifest};
pub use obsfile::{parse_observations, write_observations};

use crate::error::{Error, Result};

/// Write via a temporary sibling and rename, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::data(dir, e.to_string()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::data(&tmp, e.to_string()))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::data(path, e.to_string()))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::data(path, e.to_string()))
}
