use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown primitive `{0}`")]
    UnknownPrimitive(String),
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("operator `{op}` takes {expected} argument(s), got {found}")]
    ArityMismatch {
        op: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("unknown helper `{0}`")]
    UnknownHelper(String),
    #[error("helper `{0}` participates in a reference cycle")]
    CyclicLibrary(String),
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("synthesis result has no solution")]
    NoSolution,
    #[error("derivation trace is empty")]
    EmptyTrace,
    #[error("instance too large: arity {arity} exceeds the limit of {limit}")]
    InstanceTooLarge { arity: usize, limit: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid curriculum: {0}")]
    InvalidCurriculum(String),
    #[error("log rejected: {0}")]
    RejectLog(String),
    #[error("backend error on attempt {attempt}: {message}")]
    Backend { attempt: usize, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
