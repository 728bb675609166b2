//! Error type shared by every stage of the detection library.

use std::path::PathBuf;

use thiserror::Error;

/// Failures reported by image IO, the pipeline stages, and the evaluation
/// harness. Pure image operators are total and never return these.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {path}")]
    FileNotFound { path: PathBuf },

    #[error("failed to decode {path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    /// The field-of-view estimate came back empty (e.g. an all-black frame).
    #[error("field-of-view mask is empty")]
    DegenerateMask,

    /// A histogram or equalization was asked for over zero pixels.
    #[error("region contains no pixels")]
    EmptyRegion,

    #[error("a {tiles}x{tiles} tile grid leaves tiles under 2 pixels on a {width}x{height} image")]
    TileTooSmall { tiles: u32, width: u32, height: u32 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {message}")]
    TruthParse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}:{line}: fovea coordinates on a row with has_macula = 0")]
    TruthSemantic { path: PathBuf, line: u64 },

    #[error("no ground-truth record for result source {0:?}")]
    MissingTruth(String),

    #[error("duplicate ground-truth records for source {0:?}")]
    DuplicateTruth(String),
}

pub type Result<T> = std::result::Result<T, Error>;
