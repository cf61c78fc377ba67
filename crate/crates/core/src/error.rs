use thiserror::Error;

use crate::syntax::ParseError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("unknown field `{class}.{field}`")]
    UnknownField { class: String, field: String },
    #[error("{pp} is not an instruction of `{task}`")]
    PointNotInTask { task: String, pp: String },
    #[error("unresolvable reference `{reference}` at {pp}: no creation site flows to it")]
    UnresolvableReference { reference: String, pp: String },
    #[error("malformed graph: {0}")]
    MalformedGraph(String),
    #[error("cycle does not belong to this program: {0}")]
    CycleMismatch(String),
    #[error("invalid context: {0}")]
    InvalidContext(String),
    #[error("runtime error at {pp}: {message}")]
    Runtime { pp: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
