use std::io;

#[derive(Debug, thiserror::Error)]
pub enum SteerError {
    /// A message that does not parse or names an unsupported protocol.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// A well-formed command the session cannot apply in its current state.
    #[error("rejected: {0}")]
    Rejected(String),

    #[error(transparent)]
    Core(#[from] omps_core::Error),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    WebSocket(#[from] Box<tungstenite::Error>),
}

impl From<tungstenite::Error> for SteerError {
    fn from(e: tungstenite::Error) -> Self {
        SteerError::WebSocket(Box::new(e))
    }
}

pub type Result<T> = std::result::Result<T, SteerError>;

pub(crate) fn rejected<T>(msg: impl Into<String>) -> Result<T> {
    Err(SteerError::Rejected(msg.into()))
}
