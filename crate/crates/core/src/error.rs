use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("cell ({ix}, {iy}) is outside a {width}x{height} grid")]
    OutOfBounds {
        ix: usize,
        iy: usize,
        width: usize,
        height: usize,
    },

    #[error("resolution mismatch: {0} vs {1}")]
    ResolutionMismatch(f64, f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("no pose supplied for node {0}")]
    MissingPose(usize),

    #[error("node {0} does not exist in the pose graph")]
    InvalidNode(usize),

    #[error("pose ({x:.3}, {y:.3}) is not on a free cell")]
    BlockedPose { x: f64, y: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("runs cannot be compared: {0}")]
    Compare(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the user's configuration rather than the run.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse { .. })
    }
}
