use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed event log: {0}")]
    Structure(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("threshold calibration failed: {0}")]
    Calibration(String),

    #[error("singular fit: columns {columns:?} are collinear")]
    SingularFit { columns: Vec<usize> },

    #[error("pipeline error: {0}")]
    Pipeline(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("refusing to enumerate subsets of {n} features (cap is {cap}); raise the cap explicitly")]
    SubsetCap { n: usize, cap: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
