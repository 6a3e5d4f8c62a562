use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The fiducial vector does not satisfy the admissibility condition.
    #[error("inadmissible fiducial vector: {0}")]
    Inadmissible(String),

    /// A numerical procedure failed to reach its requested accuracy.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// A grid, schedule or sampler configuration is unusable.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
