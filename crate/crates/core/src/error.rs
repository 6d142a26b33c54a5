use thiserror::Error;

/// Errors raised across the library. The CLI maps `ResourceLimit` to exit
/// code 3 and every other variant to exit code 2.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    #[error("field width mismatch: GF(2^{0}) vs GF(2^{1})")]
    FieldMismatch(u32, u32),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("ancilla wire {0} was not restored to zero")]
    AncillaDirty(usize),
}

impl Error {
    pub fn is_resource_limit(&self) -> bool {
        matches!(self, Error::ResourceLimit(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}

pub(crate) fn resource(msg: impl Into<String>) -> Error {
    Error::ResourceLimit(msg.into())
}
