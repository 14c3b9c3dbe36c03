use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// Ciphertext that cannot be the output of this tool under the given key:
    /// bad length or a malformed padding tail.
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("{} worker(s) failed: {}", failures.len(), summarize(failures))]
    Workers { failures: Vec<WorkerFailure> },
}

#[derive(Debug, Clone)]
pub struct WorkerFailure {
    pub chunk: usize,
    pub message: String,
}

fn summarize(failures: &[WorkerFailure]) -> String {
    failures
        .iter()
        .map(|f| format!("chunk {}: {}", f.chunk, f.message.trim()))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
