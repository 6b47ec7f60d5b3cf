use std::io;

use thiserror::Error;

/// Errors produced anywhere in the estimation and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument or configuration value is outside its valid range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A config file could not be parsed.
    #[error("config error: {0}")]
    Config(String),

    /// A file did not conform to its documented layout.
    #[error("format error: {0}")]
    Format(String),

    /// The requested frequency band selects no bins.
    #[error("band error: {0}")]
    Band(String),

    /// A similarity was requested on a zero-norm vector.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("input too short: {samples} samples, need at least {needed}")]
    InputTooShort { samples: usize, needed: usize },

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_)
            | Error::Config(_)
            | Error::Band(_)
            | Error::Degenerate(_)
            | Error::InputTooShort { .. } => 2,
            Error::Format(_) => 3,
            Error::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
