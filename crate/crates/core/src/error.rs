use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller violated a documented precondition.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// State space would exceed the supported enumeration size.
    #[error("state space too large: {0}")]
    Size(String),

    /// No replica survived, so a conditioned estimate does not exist.
    #[error("degenerate sample: {survivors} survivors out of {replicas} replicas (survival estimate {survival})")]
    Degenerate {
        survivors: u64,
        replicas: u64,
        survival: f64,
    },

    #[error("numerical error: {message} (last residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// Short machine-readable tag, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Usage(_) => "usage",
            Error::Parse(_) => "parse",
            Error::Size(_) => "size",
            Error::Degenerate { .. } => "degenerate-sample",
            Error::Numerical { .. } => "numerical",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Usage(_) | Error::Parse(_) | Error::Size(_) | Error::Io(_) | Error::Json(_)
        )
    }
}
