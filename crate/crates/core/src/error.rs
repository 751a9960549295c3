use std::path::Path;

use thiserror::Error;

use crate::table::MarkupError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Schema { path: String, line: usize, message: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch in {op}: {shapes}")]
    Shape { op: &'static str, shapes: String },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error(transparent)]
    Markup(#[from] MarkupError),
    #[error("{which} markup: {source}")]
    MarkupInput {
        which: &'static str,
        #[source]
        source: MarkupError,
    },
    #[error("mismatched table ids: {}", .0.join(", "))]
    IdMismatch(Vec<String>),
    #[error("training diverged at epoch {epoch} (last finite loss {last_finite_loss})")]
    Diverged { epoch: usize, last_finite_loss: f64 },
    #[error("configuration mismatch in fields: {}", .0.join(", "))]
    ConfigMismatch(Vec<String>),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.display().to_string(), source }
    }

    pub(crate) fn shape(op: &'static str, shapes: &[&[usize]]) -> Self {
        Error::Shape { op, shapes: format!("{shapes:?}") }
    }
}
