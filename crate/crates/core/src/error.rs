use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand dimensions do not agree.
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// Input values are unusable (non-finite, empty, truncated).
    #[error("data error: {0}")]
    Data(String),

    /// An iterative kernel did not converge.
    #[error("SVD did not converge for a {rows}x{cols} matrix")]
    Numerical { rows: usize, cols: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("state error: {0}")]
    State(String),

    #[error("usage error: {0}")]
    Usage(String),

    /// A file does not follow the expected on-disk layout.
    #[error("format error: {0}")]
    Format(String),

    /// Individually valid pieces disagree with each other.
    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: String, expected: String },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
