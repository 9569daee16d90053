use std::path::PathBuf;

use neutral_orbits_core::Error as CoreError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing field `{0}`")]
    MissingField(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("{path}: {reason}")]
    Schema { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 for anything wrong with the inputs, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e {
                CoreError::InvalidParameter(_)
                | CoreError::AlphaOutOfRange(_)
                | CoreError::InfeasibleGluing { .. }
                | CoreError::NonMonotoneGlue { .. }
                | CoreError::ExtraFixedPoint { .. }
                | CoreError::AlphaMismatch { .. }
                | CoreError::OutsidePhaseInterval { .. }
                | CoreError::OverlappingNeighbourhoods { .. }
                | CoreError::DiscontinuousObservable { .. }
                | CoreError::InsufficientDepth { .. } => 2,
                _ => 3,
            },
            CliError::Csv(_) | CliError::Json(_) => 3,
            _ => 2,
        }
    }
}
