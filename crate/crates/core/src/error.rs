use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("policy error: {0}")]
    Policy(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("state error: {0}")]
    State(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("proposer `{proposer}` failed for node {node}: {message}")]
    Proposer { proposer: String, node: String, message: String },
    #[error("I/O error after {records} records: {source}")]
    Io {
        records: usize,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse { location: location.into(), message: message.into() }
    }

    /// Whether this error came from the environment rather than from bad input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(source: std::io::Error) -> Self {
        Error::Io { records: 0, source }
    }
}

pub(crate) fn check_unit(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Validation(format!("{name} must lie in [0,1], got {value}")))
    }
}
