//! Error taxonomy shared by the library and the command-line tools.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input data is structurally unusable (shape mismatch, non-finite
    /// entries, empty set).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// Data is structurally fine but numerically degenerate for the requested
    /// operation (e.g. all points coincide, so no bandwidth exists).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// A numerical routine failed to produce a usable result.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A query point carries no kernel mass against the training set.
    #[error("out of support: {0}")]
    OutOfSupport(String),

    /// An extension divides by an eigenvalue too close to zero.
    #[error("ill-posed extension for eigenpair {index}: |lambda| = {magnitude:e} below 1e-12")]
    IllPosedExtension { index: usize, magnitude: f64 },

    /// A reconstruction system has no usable information.
    #[error("ill-posed reconstruction: {0}")]
    IllPosed(String),

    /// A file's contents do not match the expected layout.
    #[error("format error in {path}: {detail}")]
    Format { path: String, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn invalid_data(msg: impl Into<String>) -> Self {
        Error::InvalidData(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateData(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn format(path: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
