use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scene has no primitives")]
    EmptyScene,

    #[error("viewpoint at ({x:.3}, {y:.3}, {z:.3}) lies inside scene geometry")]
    InsideGeometry { x: f64, y: f64, z: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("location sampling gave up after {attempts} rejections ({accepted} of {requested} accepted)")]
    SamplingExhausted {
        requested: usize,
        accepted: usize,
        attempts: usize,
    },

    #[error("no collision-free path found after {expansions} expansions")]
    NoPath { expansions: usize },

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("scene has no surface inside its bounds")]
    NoSurface,

    #[error("run aborted at step {step}: {reason}")]
    RunAborted { step: usize, reason: String },

    #[error("{path}: schema version {found}, expected {expected}")]
    SchemaMismatch {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("corrupt map blob: {0}")]
    CorruptBlob(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
