use thiserror::Error;

/// Errors raised by the library. CLI exit codes are derived from the variant.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval: left endpoint {left} exceeds right endpoint {right}")]
    InvalidInterval { left: f64, right: f64 },

    #[error("miscoverage level {0} is outside the open interval (0, 1)")]
    InvalidGamma(f64),

    #[error("alpha {0} is outside the open interval (0, 1)")]
    InvalidAlpha(f64),

    #[error("invalid gamma grid: {0}")]
    InvalidGrid(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid model specification: {0}")]
    InvalidModel(String),

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("cell (n={n}, sigma={sigma}, localizer_bw={bw}) failed: {source}")]
    Cell {
        n: usize,
        sigma: f64,
        bw: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
