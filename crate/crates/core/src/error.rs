use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("empty expression")]
    EmptyInput,

    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("domain error evaluating `{expr}` at z = {z}: {reason}")]
    Domain {
        expr: String,
        z: f64,
        reason: &'static str,
    },

    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("matrix is singular at z = {z} (|det| = {det:e})")]
    Singular { z: f64, det: f64 },

    #[error("positivity violated numerically: Cholesky pivot {pivot:e} at index {index}")]
    Positivity { index: usize, pivot: f64 },

    #[error("weight is not admissible: {0}")]
    Weight(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Whether the error originates from parsing user-provided text.
    pub fn is_parse(&self) -> bool {
        matches!(
            self,
            Error::EmptyInput
                | Error::Syntax { .. }
                | Error::UnknownIdentifier { .. }
                | Error::Json { .. }
        )
    }
}
