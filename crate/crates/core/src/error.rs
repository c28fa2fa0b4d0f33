use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition error: {0}")]
    Precondition(String),
    #[error("invariant violated ({invariant}): {detail}")]
    Invariant { invariant: String, detail: String },
    #[error("coverage error: oracle undefined on {0}")]
    Coverage(String),
    #[error("conditioning error: {0}")]
    Conditioning(String),
    #[error("instance error: {0}")]
    Instance(String),
    #[error("support mismatch: {0}")]
    SupportMismatch(String),
    #[error("data inconsistency: {0}")]
    DataInconsistency(String),
    #[error("degenerate consumption: {0}")]
    DegenerateConsumption(String),
    #[error("model misfit: {0}")]
    ModelMisfit(String),
    #[error("class error: {0}")]
    Class(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn invariant(invariant: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Invariant { invariant: invariant.into(), detail: detail.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
