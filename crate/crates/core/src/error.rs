use thiserror::Error;

/// Why an authenticated request was refused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AuthError {
    /// Signature did not verify, or the signer is unknown.
    #[error("signature rejected")]
    Reject,
    /// The signer asked for data that belongs to another entity.
    #[error("request outside the signer's scope")]
    Scope,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error("undefined input: {0}")]
    UndefinedInput(String),
    #[error("empty dataset for entity {0}")]
    EmptyDataset(String),
    #[error("no density structure found")]
    NoStructure,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("wire decode error: {0}")]
    Decode(String),
    #[error("pipeline error: {0}")]
    Pipeline(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
