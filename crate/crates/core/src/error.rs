use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("undefined result: {0}")]
    Undefined(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("data format error in {source_name}: {message}")]
    Format { source_name: String, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn format(source_name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format { source_name: source_name.into(), message: message.into() }
    }
}
