use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GimbalError {
    #[error("invalid coordinate (lat={lat}, lon={lon}): lat must lie in [-90, 90] and lon in [-180, 180]")]
    InvalidPoint { lat: f64, lon: f64 },

    #[error("target {target}: K={k} exceeds the {eligible} eligible neighbors")]
    NeighborhoodTooLarge { target: usize, k: usize, eligible: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("effective sample size is undefined for an all-zero weight vector")]
    ZeroWeights,

    #[error("normal matrix is singular; stability bound undefined")]
    SingularSystem,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("target {target}: neighborhoods differ between the compared runs")]
    NeighborhoodMismatch { target: usize },

    #[error("{path}: row {row}: {message}")]
    Dataset { path: PathBuf, row: usize, message: String },

    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy { kind: &'static str, name: String, available: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl GimbalError {
    /// True for errors caused by user-supplied input rather than internal faults.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, GimbalError::Io(_) | GimbalError::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, GimbalError>;
