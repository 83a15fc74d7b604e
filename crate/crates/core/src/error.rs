use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension { what: &'static str, expected: usize, got: usize },

    #[error("PV inversion failed for wavenumber {wavenumber}: {reason}")]
    Inversion { wavenumber: usize, reason: String },

    #[error("interval of {seconds} s is not a whole number of {dt} s steps")]
    StepCount { seconds: f64, dt: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("observation location ({x}, {y}) outside the grid")]
    ObsLocation { x: f64, y: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error in {path}: {reason}")]
    Data { path: PathBuf, reason: String },

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Training { epoch: usize, reason: String },

    #[error("cycle {cycle} diverged: {reason}")]
    Diverged { cycle: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn data(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Data { path: path.into(), reason: reason.into() }
    }

    /// Process exit code: 1 config, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Data { .. } | Error::Io(_) | Error::Insufficient(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { what, expected, got });
    }
    Ok(())
}
