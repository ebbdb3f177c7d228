use thiserror::Error;

/// Errors raised across the laboratory.
///
/// Variants split into two families that the experiment runner maps onto
/// distinct exit codes: invalid inputs (a parameter or precondition the caller
/// must fix) and finite-window failures (the sample did not contain the
/// percolation structure an estimator needs).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("no giant cluster: {0}")]
    NoGiant(String),

    #[error("window too small: {0}")]
    WindowTooSmall(String),

    #[error("routing failed: {0}")]
    RoutingFailed(String),

    #[error("graph too large for exhaustive enumeration: {size} vertices (limit {limit})")]
    TooLarge { size: usize, limit: usize },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error reflects a sample that lacks the required giant or
    /// crossing structure, as opposed to bad parameters.
    pub fn is_window_failure(&self) -> bool {
        matches!(self, Error::NoGiant(_) | Error::WindowTooSmall(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
