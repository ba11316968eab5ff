use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Filter support, window or grid sizes are incompatible.
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("solver diverged: {0}")]
    Divergence(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
