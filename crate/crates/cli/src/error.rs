use std::path::PathBuf;

use claw_core::ClawError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: PathBuf, column: String },

    #[error("{file}:{line}: {message}")]
    Parse {
        file: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{file}:{line}: row has {found} cells, expected {expected}")]
    RaggedRow {
        file: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("config {path}: {message}")]
    Config { path: String, message: String },

    #[error("{0}")]
    Flag(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Claw(#[from] ClawError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for bad input or configuration, 3 when the numerics break down.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Claw(e) => claw_exit_code(e),
            _ => 2,
        }
    }
}

fn claw_exit_code(e: &ClawError) -> i32 {
    match e {
        ClawError::DegenerateSample
        | ClawError::NonPositiveScale(_)
        | ClawError::ZeroWeightRow { .. } => 3,
        ClawError::Replication { source, .. } => claw_exit_code(source),
        _ => 2,
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
