use thiserror::Error;

/// Errors surfaced by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("range mismatch: {0}")]
    RangeMismatch(String),

    #[error("truncation: {0}")]
    Truncation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate state: anticommutator norm for {observable} vanishes")]
    DegenerateState { observable: &'static str },

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(line: usize, msg: impl Into<String>) -> Self {
        Error::Config {
            line,
            msg: msg.into(),
        }
    }

    /// Exit code category for the CLI: 1 = config, 2 = numerical check.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Io(_) => 1,
            _ => 2,
        }
    }
}
