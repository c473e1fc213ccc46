use std::io;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("partitioning failed: {0}")]
    Partition(String),

    #[error("migration failed: {0}")]
    Migration(String),

    #[error("corrupt payload: {0}")]
    Payload(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub fn partition(msg: impl Into<String>) -> Self {
        Error::Partition(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
