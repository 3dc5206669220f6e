//! Harness error type with CLI exit-code mapping.

use std::path::PathBuf;

use cab_core::CabError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad configuration: unknown keys, out-of-range values, missing files.
    /// Exits with code 1.
    #[error("configuration error: {0}")]
    Config(String),

    /// A policy or solver failed mid-run. Exits with code 2.
    #[error("run failed at round {round} for policy {policy}: {source}")]
    RunFailed {
        policy: String,
        round: usize,
        source: CabError,
    },

    /// Core-library failure outside the round loop. Exits with code 2.
    #[error(transparent)]
    Core(#[from] CabError),

    /// Filesystem failure. Exits with code 2.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for configuration problems, 2 for runtime ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            _ => 2,
        }
    }
}
