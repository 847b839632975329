use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid modulus {0}: must be an odd prime >= 3")]
    InvalidModulus(u32),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("sort error in `{atom}`: {msg}")]
    Sort { atom: String, msg: String },

    #[error("embedding error: {0}")]
    Embedding(String),

    #[error("elements belong to different groups")]
    ParentMismatch,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("budget exceeded: {what} (limit {limit}){}", best_bound.map(|b| format!(", best upper bound {b}")).unwrap_or_default())]
    Budget {
        what: String,
        limit: u64,
        best_bound: Option<u64>,
    },

    #[error("unbound variable {0}")]
    UnboundVariable(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("graph is not nice: {0}")]
    NotNice(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn budget(what: impl Into<String>, limit: u64) -> Self {
        Error::Budget {
            what: what.into(),
            limit,
            best_bound: None,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
