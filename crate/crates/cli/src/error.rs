use std::path::PathBuf;

use thiserror::Error;

use timbre_core::audio_io::AudioError;
use timbre_core::cluster::ClusterError;
use timbre_core::dataset::DatasetError;
use timbre_core::eval::EvalError;
use timbre_core::features::FeatureError;
use timbre_core::learn::LearnError;

/// Exit statuses of the `timbre` binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const LAYOUT: i32 = 2;
    pub const DECODE: i32 = 3;
    pub const SCHEMA: i32 = 4;
    pub const TRAINING: i32 = 5;
    pub const USAGE: i32 = 64;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("dataset layout: {0}")]
    Layout(#[source] DatasetError),
    #[error("cannot decode {path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: AudioError,
    },
    #[error("feature extraction failed for {path}: {source}")]
    Features {
        path: PathBuf,
        #[source]
        source: FeatureError,
    },
    #[error("schema: {0}")]
    Schema(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("clustering failed: {0}")]
    Cluster(#[from] ClusterError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Layout(_) => exit::LAYOUT,
            CliError::Decode { .. } | CliError::Features { .. } => exit::DECODE,
            CliError::Schema(_) => exit::SCHEMA,
            CliError::Training(_) | CliError::Cluster(_) => exit::TRAINING,
            CliError::Config(_) => exit::USAGE,
            CliError::Io { .. } => exit::FAILURE,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Problems reading a feature table: unreadable files stay I/O errors,
    /// everything else is a schema mismatch.
    pub fn from_table(path: &std::path::Path, err: DatasetError) -> Self {
        match err {
            DatasetError::Io(source) => CliError::io(path, source),
            other => CliError::Schema(format!("{}: {other}", path.display())),
        }
    }

    /// Problems loading a model file.
    pub fn from_model_load(path: &std::path::Path, err: LearnError) -> Self {
        match err {
            LearnError::Io { source, .. } => CliError::io(path, source),
            other => CliError::Schema(format!("{}: {other}", path.display())),
        }
    }
}

impl From<LearnError> for CliError {
    fn from(err: LearnError) -> Self {
        CliError::Training(err.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(err: EvalError) -> Self {
        match err {
            EvalError::Io(source) => CliError::Io {
                path: PathBuf::from("<report>"),
                source,
            },
            other => CliError::Training(other.to_string()),
        }
    }
}
