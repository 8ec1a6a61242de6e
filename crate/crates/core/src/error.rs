use std::path::PathBuf;

/// Errors raised anywhere in the training harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("format error: {0}")]
    Format(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("sampler mode error: {0}")]
    Mode(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite value in layer {layer}")]
    NonFiniteLayer { layer: usize },
    #[error("non-finite directional derivative at alpha = {alpha:e}")]
    NonFiniteSlope { alpha: f64 },
}

impl Error {
    /// True for errors caused by numeric breakdown rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFiniteLayer { .. } | Error::NonFiniteSlope { .. })
    }

    /// True for errors caused by missing or malformed data files.
    pub fn is_data(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Parse { .. } | Error::Format(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
