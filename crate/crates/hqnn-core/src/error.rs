//! Error taxonomy shared across the workspace.
//!
//! The categories map onto how callers should react: `Config` means the
//! request itself was malformed, `Contract` means an internal API was fed
//! shapes or values it documents as unacceptable, `Parse` carries the
//! row/column of a bad data file, and `Usage` covers sequencing mistakes
//! (empty splits, too little data).

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    /// CSV/data-file errors. `row` is 1-based and counts the header as row 1.
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("degenerate scale: {0}")]
    DegenerateScale(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
