use thiserror::Error;

/// Errors raised anywhere in the processing chain.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input text (scenario, profile or CSV files).
    #[error("parse error: {0}")]
    Parse(String),

    /// Input parsed but violates a domain invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Binary tensor file is malformed or truncated.
    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Linear algebra or other numerical failure.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A trajectory was evaluated outside of its sampled time span.
    #[error("time {t} s is outside the trajectory span [{start}, {end}] s")]
    OutOfSpan { t: f64, start: f64, end: f64 },

    /// Calibration divisor vanished.
    #[error("calibration divisor is zero at subcarrier {0}")]
    ZeroDivisor(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line front-end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::OutOfSpan { .. } | Error::ZeroDivisor(_) => 2,
            Error::Parse(_) | Error::Format { .. } | Error::Io(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
