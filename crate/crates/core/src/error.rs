use thiserror::Error;

/// Errors raised by samplers, solvers and experiment plumbing.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// `n + s` has the wrong parity for the requested ±1 sum.
    #[error("infeasible parity: n = {n}, target sum = {sum} (n + sum must be even)")]
    Parity { n: usize, sum: i64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A row-span distance or singular value fell below the degeneracy threshold.
    #[error("degenerate input at index {index}: value {value:e} below threshold")]
    Degenerate { index: usize, value: f64 },

    #[error("{routine} did not converge")]
    NoConvergence { routine: &'static str },

    #[error("exact enumeration of {size} cases exceeds the limit {limit}")]
    TooLarge { size: u128, limit: u128 },

    #[error("i/o failure: {0}")]
    Io(String),

    #[error("malformed record: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
