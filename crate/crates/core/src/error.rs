use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A time or index lies beyond the range covered by a path or clock.
    #[error("range error: {0}")]
    Range(String),
    /// The request would exceed the configured memory budget.
    #[error("resource error: {0}")]
    Resource(String),
    #[error("quadrature did not converge: estimated error {estimate:e} > tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },
    #[error("insufficient sample: {0}")]
    InsufficientSample(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
