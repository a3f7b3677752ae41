use thiserror::Error;

/// Errors raised by the geometric and functional layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A blow-up direction is undefined because the radial coordinate vanished.
    #[error("indeterminate direction: {0}")]
    IndeterminateDirection(&'static str),
    /// A denominator vanished at a point where no continuous value exists.
    #[error("singular point: {0}")]
    Singular(String),
    /// A 0/0 configuration of the recursion map.
    #[error("indeterminate form: {0}")]
    Indeterminate(String),
    /// Invalid configuration of a verification run.
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
