use std::io;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("app `{app}` references unknown permission `{permission}`")]
    UnknownPermission { app: String, permission: String },

    #[error("duplicate app id `{0}`")]
    DuplicateApp(String),

    #[error("invalid registry: {0}")]
    Registry(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("training document {index} is empty after tokenization")]
    EmptyDocument { index: usize },

    #[error("document has no in-vocabulary tokens")]
    NoInVocabularyTokens,

    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("permission `{0}` is not in the registry")]
    MissingPermission(String),

    #[error("{0}")]
    ModelMismatch(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad parameters rather than bad data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidParameter(_))
    }
}
