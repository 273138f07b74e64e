use std::io;

/// Errors produced anywhere in the coding pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported grid {rows}x{cols}: {reason}")]
    UnsupportedGrid {
        rows: usize,
        cols: usize,
        reason: &'static str,
    },

    #[error("corrupt stream: {0}")]
    CorruptStream(String),

    #[error("malformed payload: {0}")]
    MalformedPayload(String),

    #[error("qp {0} outside [0, 51]")]
    QpOutOfRange(i32),

    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("missing cost entry for poc {0}")]
    MissingCost(u32),

    #[error("external encoder failed: {0}")]
    ProcessFailure(String),

    #[error("unparsable encoder output: {0}")]
    UnparsableOutput(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("need at least 4 RD points, got {0}")]
    InsufficientPoints(usize),

    #[error("RD curves do not overlap")]
    DisjointRanges,

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
