use thiserror::Error;

use crate::evolution::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The evolution produced a non-finite value or crossed the max-norm
    /// threshold. `partial` holds everything recorded before the failure.
    #[error("solution blew up at t = {time}: {reason}")]
    BlowUp {
        time: f64,
        reason: String,
        partial: Option<Box<Trajectory>>,
    },

    #[error("tracking lost: {0}")]
    TrackingLost(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
