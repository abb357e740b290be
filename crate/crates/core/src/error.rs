use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("numerical blow-up at t = {time}: {detail}")]
    BlowUp { time: f64, detail: String },

    #[error("non-finite state component `{0}`")]
    NonFinite(&'static str),

    #[error("no limit cycle for J = {0} (requires J > 0)")]
    NoLimitCycle(f64),

    #[error("phase is undefined at E = 0")]
    PhaseSingular,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("horizon too short: {0}")]
    HorizonTooShort(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("search range does not bracket a transition: {0}")]
    NoBracket(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Checkpoint(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
