use thiserror::Error;

/// Errors raised by model construction, simulation setup and integration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("arithmetic overflow: {0}")]
    Overflow(String),
    #[error("integration error: {0}")]
    Integration(String),
    #[error("lattice has {size} states, above the cap of {cap}; use a larger truncation tolerance")]
    LatticeTooLarge { size: usize, cap: usize },
    #[error("usage error: {0}")]
    Usage(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
