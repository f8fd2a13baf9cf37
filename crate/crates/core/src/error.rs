use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("image error on {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("duplicate image id {0:?}")]
    DuplicateImageId(String),
    #[error("image {image_id:?} has invalid dimensions {width}x{height} (minimum 16x16)")]
    InvalidDimensions {
        image_id: String,
        width: i64,
        height: i64,
    },
    #[error("unknown image id {0:?}")]
    UnknownImageId(String),
    #[error("point ({x}, {y}) outside image {image_id:?} of size {width}x{height}")]
    OutOfBounds {
        image_id: String,
        x: i64,
        y: i64,
        width: u32,
        height: u32,
    },
    #[error("intra pair {pair_id:?} points are {distance:.3} px apart, below the minimum {threshold:.3} px")]
    MinDistanceViolation {
        pair_id: String,
        distance: f64,
        threshold: f64,
    },
    #[error("pair {0:?} kind does not match its image ids")]
    KindMismatch(String),
    #[error("duplicate pair id {0:?}")]
    DuplicatePairId(String),
    #[error("ordinal label must be -1, 0 or 1, got {0}")]
    InvalidLabel(i64),
    #[error("cross-image pairs need at least two images")]
    SingleImageDataset,
    #[error("empty manifest")]
    EmptyManifest,
    #[error("class id {0} is not in the tier table")]
    UnknownClassId(u32),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },
    #[error("no annotations to sample from")]
    EmptyAnnotationSet,
    #[error("empty prediction set")]
    EmptySet,
    #[error("length mismatch: {predictions} predictions vs {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("tier {0} has no training scores")]
    EmptyTier(u8),
    #[error("tier cutoffs are not strictly descending: {0:?}")]
    NonMonotoneCutoffs([f64; 3]),
    #[error("non-finite loss at step {step}: acc={acc_loss} cons={cons_loss}")]
    NonFiniteLoss {
        step: usize,
        acc_loss: f64,
        cons_loss: f64,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.to_string(),
        }
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
