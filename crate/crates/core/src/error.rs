use std::path::PathBuf;

use thiserror::Error;

use crate::encoding::EncodingError;
use crate::engine::EngineError;
use crate::eval::EvalError;
use crate::inject::InjectError;
use crate::ontology::OntologyError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Inject(#[from] InjectError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Errors caused by invalid user-supplied definitions or settings, as
    /// opposed to failures while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Ontology(_)
                | Error::Engine(EngineError::InvalidConfig(_))
                | Error::Inject(InjectError::InvalidConfig(_))
                | Error::Eval(EvalError::InvalidConfig(_))
                | Error::Usage(_)
        )
    }
}
