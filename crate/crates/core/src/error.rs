use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid extents {nx}x{ny}x{nz}: need nx >= 1, ny >= 1, nz >= 2")]
    InvalidExtents { nx: usize, ny: usize, nz: usize },

    #[error("extents mismatch: {0}")]
    ExtentsMismatch(String),

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("non-finite value at linear index {index}")]
    NonFinite { index: usize },

    #[error("invalid coefficients: {0}")]
    InvalidCoeffs(String),

    #[error("field format error: {0}")]
    Format(String),

    #[error("shift buffer: {0}")]
    ShiftBuffer(String),

    #[error("invalid pipeline configuration: {0}")]
    InvalidConfig(String),

    #[error("pipeline stage `{stage}` failed: {reason}")]
    StageFailed { stage: String, reason: String },

    #[error("pipeline stalled for {seconds:.1}s without progress; queue occupancy: {dump}")]
    Stalled { seconds: f64, dump: String },

    #[error("invalid performance parameters: {0}")]
    InvalidPerfParams(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
