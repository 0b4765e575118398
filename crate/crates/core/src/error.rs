use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid solver or generator configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A scalar operation was called outside its domain.
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    /// Vector/matrix dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A channel evaluation failed for a specific measurement row.
    #[error("channel error at row {row}: {source}")]
    Channel {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    /// A validation oracle failed to converge or was fed degenerate input.
    #[error("oracle error: {0}")]
    Oracle(String),

    /// Malformed input file.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Underlying I/O failure, annotated with the path involved.
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            op,
            msg: msg.into(),
        }
    }

    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub fn at_row(self, row: usize) -> Self {
        Error::Channel {
            row,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
