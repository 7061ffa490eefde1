use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("data error{}: {msg}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Data { row: Option<usize>, msg: String },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("unsupported: {0}")]
    Capability(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("artifact mismatch: {0}")]
    ArtifactMismatch(String),
    #[error("malformed artifact: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data { row: None, msg: msg.into() }
    }

    pub fn data_at(row: usize, msg: impl Into<String>) -> Self {
        Error::Data { row: Some(row), msg: msg.into() }
    }
}
