use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: malformed row: {reason}")]
    MalformedRow { file: PathBuf, line: u64, reason: String },

    #[error("duplicate slide id {0:?}")]
    DuplicateSlideId(String),

    #[error("{file}:{line}: probability {value} outside [0, 1]")]
    ProbabilityOutOfRange { file: PathBuf, line: u64, value: f64 },

    #[error("invalid network topology: {0}")]
    InvalidTopology(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid training configuration: {0}")]
    InvalidTrainConfig(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset contains a single class; both malignant and normal examples are required")]
    SingleClassDataset,

    #[error("too few {label} examples for {folds} folds: have {have}")]
    TooFewExamples {
        label: &'static str,
        have: usize,
        folds: usize,
    },

    #[error("confusion matrix is empty")]
    EmptyEvaluation,

    #[error("scores contain a single class; AUC is undefined")]
    SingleClassScores,

    #[error("classifier used before fit")]
    NotFitted,

    #[error("invalid synthetic dataset configuration: {0}")]
    InvalidConfig(String),

    #[error("model file {path}: {reason}")]
    ModelFormat { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }
}
