use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("ellipsoid placement failed: {0}")]
    Placement(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: [usize; 3],
        found: [usize; 3],
    },

    #[error("ground truth contains no annotated instances")]
    EmptyGt,

    #[error("unsupported TIFF feature: {0}")]
    UnsupportedTiff(String),

    #[error("corrupt TIFF header: {0}")]
    CorruptHeader(String),

    #[error("payload length mismatch: expected {expected} bytes, found {found}")]
    LengthMismatch { expected: u64, found: u64 },

    #[error("bad sidecar {path}: {message}")]
    BadSidecar { path: PathBuf, message: String },

    #[error("schema error at `{path}`{}: {message}", location(*line, *column))]
    Schema {
        path: String,
        line: Option<usize>,
        column: Option<usize>,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn location(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!(" (line {l}, column {c})"),
        (Some(l), None) => format!(" (line {l})"),
        _ => String::new(),
    }
}

impl Error {
    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            line: None,
            column: None,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable category, used for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Degenerate(_) => "degenerate",
            Error::Config(_) => "config",
            Error::Placement(_) => "placement",
            Error::GridMismatch(_) | Error::ShapeMismatch { .. } => "mismatch",
            Error::EmptyGt => "empty-gt",
            Error::UnsupportedTiff(_) | Error::CorruptHeader(_) => "tiff",
            Error::LengthMismatch { .. } | Error::BadSidecar { .. } => "raw",
            Error::Schema { .. } => "schema",
            Error::Io { .. } => "io",
        }
    }
}
