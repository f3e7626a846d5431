use thiserror::Error;

/// Errors raised by the simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The covariance matrix violates the uncertainty relation.
    #[error("unphysical state: smallest symplectic eigenvalue {0:.6e} is below 1/2")]
    Unphysical(f64),

    #[error("not enough data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
