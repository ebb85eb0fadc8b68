use thiserror::Error;

/// Errors surfaced by estimators, bound computations, and the reduction
/// pipeline. `Config` covers bad arguments and invalid declarations;
/// the numerical variants mean the computation itself could not proceed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    /// The model's output variance vanished (or the moments collapsed),
    /// so no variance-normalized quantity is defined.
    #[error("degenerate model: {0}")]
    Degenerate(String),

    /// A model evaluation returned NaN or infinity.
    #[error("non-finite model output at row {row}")]
    NonFinite { row: usize },

    /// Moment estimates that violate their defining identities
    /// (negative variance, second moment below squared mean, ...).
    #[error("inconsistent moments: {0}")]
    InconsistentMoments(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}
