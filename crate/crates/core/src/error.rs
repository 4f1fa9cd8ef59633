use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A documented precondition was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("episode over: step {t} is not below horizon {horizon}")]
    EpisodeOver { t: usize, horizon: usize },

    /// Configuration could not be loaded or failed validation. `field` is a
    /// dotted path into the config file.
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("missing checkpoint for stage `{stage}`: run `codesign train --stage {stage}` first")]
    MissingCheckpoint { stage: String },

    #[error("training stage order: {0}")]
    StageOrder(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error on {path}: {message}")]
    Serde { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
