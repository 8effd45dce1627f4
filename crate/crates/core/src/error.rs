use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate term `{0}`")]
    DuplicateTerm(String),

    #[error("term `{0}` has a zero vector and cannot be normalized")]
    ZeroVector(String),

    #[error("unknown term `{0}`")]
    UnknownTerm(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("self-loop triple on `{0}`")]
    SelfLoop(String),

    #[error("line {line}: unresolved term `{term}`")]
    Unresolved { line: usize, term: String },

    #[error("dictionary is empty")]
    EmptyDictionary,

    #[error("degenerate goal: `{0}` => `{0}` has a zero goal vector")]
    DegenerateGoal(String),

    #[error("oracle guard: {0}")]
    Guard(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
