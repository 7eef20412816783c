use thiserror::Error;

/// Errors produced by the numerics, model, and I/O layers.
///
/// `Format` and `Io` indicate unusable inputs (bad files, bad arguments);
/// everything else is a numerical or contract violation discovered at
/// run time.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArg(String),

    #[error("spectrum layout error: {0}")]
    Layout(String),

    #[error("operation requires a periodic grid: {0}")]
    NonPeriodic(String),

    #[error("Nyquist violation: {0}")]
    Nyquist(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by unusable input files or arguments
    /// (mapped to exit code 2 by the CLI), as opposed to numerical or
    /// validation failures (exit code 1).
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Format(_) | Error::Io(_) | Error::InvalidArg(_))
    }
}
