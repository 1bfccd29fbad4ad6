use std::path::PathBuf;

use crate::loadbal::LoadError;
use crate::net::NetError;
use crate::parengine::EngineError;
use crate::partition::PartitionError;
use crate::perfmodel::ModelError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Top-level error used by the command layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by bad input rather than a failure inside the
    /// program. The binary maps these to exit status 2.
    pub fn is_user_error(&self) -> bool {
        match self {
            Error::Net(_) | Error::Load(_) | Error::Usage(_) | Error::Io { .. } => true,
            Error::Partition(_) => true,
            Error::Model(e) => e.is_input_error(),
            Error::Engine(e) => e.is_input_error(),
        }
    }
}
