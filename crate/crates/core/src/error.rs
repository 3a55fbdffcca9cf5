use std::io;

use thiserror::Error;

use crate::baseline::BaselineError;
use crate::data::DataError;
use crate::embed::EmbedError;
use crate::formats::FormatError;
use crate::harness::HarnessError;
use crate::heads::HeadError;
use crate::preproc::PreprocError;
use crate::synth::SynthError;
use crate::transform::TransformError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Preproc(#[from] PreprocError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Head(#[from] HeadError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

impl Error {
    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Embed(EmbedError::ModelLoad(_)) => ErrorKind::Config,
            Error::Head(HeadError::NonFinite(_)) => ErrorKind::Numeric,
            Error::Baseline(BaselineError::NonConvergence { .. }) => ErrorKind::Numeric,
            Error::Harness(HarnessError::Config(_)) => ErrorKind::Config,
            _ => ErrorKind::Data,
        }
    }
}

impl From<io::Error> for Error {
    fn from(source: io::Error) -> Self {
        Error::Io {
            context: "i/o".into(),
            source,
        }
    }
}
