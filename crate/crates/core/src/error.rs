use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty trace: no black pixels survived digitization")]
    EmptyTrace,
    #[error("wiring error: {0}")]
    Wiring(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("degenerate diagnostic profile: both hypotheses assign zero likelihood to the tally")]
    DegenerateProfile,
    #[error("normalization error: {0}")]
    Normalization(String),
    #[error("insufficient sample: need at least {needed}, got {got}")]
    InsufficientSample { needed: usize, got: usize },
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("model format: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
