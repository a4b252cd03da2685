use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite loss or gradient at sample {sample}")]
    NumericOverflow { sample: usize },

    #[error("degenerate abscissae: both anchors at alpha = {0}")]
    DegenerateAbscissae(f64),

    #[error("zero slope: both anchors have directional derivative {0}")]
    ZeroSlope(f64),

    #[error("not a descent direction: directional derivative at origin is {0}")]
    NotDescent(f64),

    #[error("search direction is zero")]
    InvalidDirection,

    #[error("evaluation budget of {0} exhausted")]
    BudgetExhausted(u64),

    #[error("incomplete robustness table: missing strategy={strategy} problem={problem} optimizer={optimizer}")]
    IncompleteTable {
        strategy: String,
        problem: String,
        optimizer: String,
    },

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { path: PathBuf, found: u32, expected: u32 },

    #[error("{path}: truncated, expected {expected} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("io error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    /// True for errors caused by malformed or missing data files.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::BadMagic { .. } | Error::Truncated { .. } | Error::CountMismatch { .. } | Error::Io { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
