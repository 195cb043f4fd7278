use std::io;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs are individually valid but inconsistent with each other.
    #[error("contract violated: {0}")]
    Contract(String),

    #[error("simulation diverged at tau={tau}: non-finite value at index {index} ({what})")]
    Diverged {
        tau: f64,
        index: usize,
        what: &'static str,
    },

    #[error("bad snapshot: {0}")]
    Format(String),

    #[error("bad config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
