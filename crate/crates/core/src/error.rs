use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid {width}x{height}: both dimensions must be at least 2")]
    InvalidGrid { width: usize, height: usize },

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("array length {found} does not match grid size {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("need at least {needed} matches, got {got}")]
    TooFewMatches { needed: usize, got: usize },

    #[error("RANSAC found no inliers at threshold {threshold}; increase the threshold")]
    NoInliers { threshold: f64 },

    #[error("scale unobservable: source points are degenerate")]
    ScaleUnobservable,

    #[error("solved scale {0} is not positive")]
    NonPositiveScale(f64),

    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("no valid pixels")]
    NoValidPixels,

    #[error("non-finite value in loss term `{term}`")]
    NonFiniteLoss { term: &'static str },

    #[error("pyramid level {level} gives a {width}x{height} grid, smaller than 2x2")]
    GridTooSmall {
        level: usize,
        width: usize,
        height: usize,
    },

    #[error("empty valid intersection between prediction and ground truth")]
    EmptyIntersection,

    #[error("median of prediction is zero")]
    ZeroMedian,

    #[error("surface missed by {missed} of {total} pixels")]
    SurfaceMiss { missed: usize, total: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("{path}: expected shape {expected}, found {found:?}")]
    ShapeMismatch {
        path: PathBuf,
        expected: String,
        found: Vec<usize>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
