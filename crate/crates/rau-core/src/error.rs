use thiserror::Error;

/// Errors shared across the pipeline.
#[derive(Debug, Error)]
pub enum RauError {
    /// An utterance was empty after trimming.
    #[error("empty utterance")]
    EmptyUtterance,

    /// A TSV line did not have the expected fields.
    #[error("malformed line {0}")]
    MalformedLine(usize),

    /// An assembled sequence exceeded the configured maximum length.
    #[error("sequence of length {actual} exceeds maximum {max}")]
    TooLong { actual: usize, max: usize },

    /// Tensor dimensions did not agree.
    #[error("shape mismatch: {0}")]
    ShapeError(String),

    /// A layer or head index was outside the configured range.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// A non-finite value was produced or consumed.
    #[error("numeric error: {0}")]
    NumericError(String),

    /// A training or evaluation split contained no examples.
    #[error("empty dataset")]
    EmptyDataset,

    /// A metric was requested over an empty corpus.
    #[error("empty corpus")]
    EmptyCorpus,

    /// A checkpoint file was malformed or truncated.
    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),

    /// A configuration value was missing or invalid.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RauError>;
