//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({x:.3}, {y:.3}) is outside the world bounds")]
    OutOfBounds { x: f64, y: f64 },
    #[error("pose ({x:.3}, {y:.3}) lies inside object {object}")]
    InsideObject { x: f64, y: f64, object: usize },
    #[error("path crosses occupied geometry near ({x:.3}, {y:.3})")]
    PathCollision { x: f64, y: f64 },
    #[error("scan has {got} beams, expected {expected}")]
    BeamCountMismatch { expected: usize, got: usize },
    #[error("label vectors have different lengths ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("dataset too small: {got} windows, need at least {need}")]
    DatasetTooSmall { need: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("start pose is not in known-free space")]
    StartNotFree,
    #[error("candidate viewpoint is unreachable and must be filtered before scoring")]
    UnreachableCandidate,
    #[error("world generation failed after {attempts} attempts: {reason}")]
    GenerationFailed { attempts: usize, reason: String },
    #[error("invalid world file: {0}")]
    InvalidWorld(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported file version {got}, expected {expected}")]
    VersionMismatch { expected: u32, got: u32 },
    #[error("corrupt {kind} file: {detail}")]
    CorruptFile { kind: &'static str, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
