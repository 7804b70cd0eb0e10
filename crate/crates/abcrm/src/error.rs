use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by all modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate document id `{0}`")]
    DuplicateId(String),

    #[error("unknown label `{0}` (expected R, I or U)")]
    UnknownLabel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("feature `{0}` does not occur in the training corpus")]
    MissingFeature(String),

    #[error("training partition has no {0} documents")]
    EmptyClass(&'static str),

    #[error("training corpus has an empty vocabulary")]
    EmptyVocabulary,

    #[error("predictions and truth disagree on document ids: {0}")]
    IdMismatch(String),

    #[error("truth contains no positive instances")]
    NoPositives,

    #[error("unknown experiment setup `{0}`")]
    UnknownSetup(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
