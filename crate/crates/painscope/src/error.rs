//! Crate-wide error type.
//!
//! Every fallible library function returns [`Error`]. Binary and example
//! code converts these into process exit codes; see `bin/painscope.rs`.

use std::path::PathBuf;

/// Unified error for data ingestion, configuration, training, and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Tensor shapes or sizes are incompatible with the requested operation.
    #[error("shape mismatch in {op}: {details}")]
    Shape { op: &'static str, details: String },

    /// A configuration value is outside its accepted domain.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A value fell outside its documented domain (e.g. a pain score above 5).
    #[error("domain error: {0}")]
    Domain(String),

    /// A manifest line or checkpoint buffer could not be decoded.
    #[error("format error in {path}: {details}")]
    Format { path: PathBuf, details: String },

    /// An image file could not be read or decoded.
    #[error("cannot ingest image {path}: {details}")]
    Ingest { path: PathBuf, details: String },

    /// Training produced a non-finite loss; the run cannot continue.
    #[error("non-finite loss at fold {fold}, epoch {epoch}")]
    NonFiniteLoss { fold: usize, epoch: usize },

    /// Underlying filesystem failure.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Wraps an `io::Error` with the path it occurred on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
