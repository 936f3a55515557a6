use thiserror::Error;

/// Errors raised by the numerical core.
///
/// `Config` covers invalid static settings (shapes, schedules, ranges);
/// `Usage` covers calls that are well-formed but cannot be honored with the
/// supplied arguments (empty batch, missing constant, degenerate fit).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
