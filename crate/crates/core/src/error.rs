use std::path::PathBuf;

/// Crate-wide error type.
///
/// Variants are grouped by who can fix the problem: `Io`, `Parse`, `Config`,
/// `Reference` and `Invalid` point at the user's files or settings and map to
/// exit code 2 in the CLI; the remaining variants are computational failures
/// and map to exit code 1.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {msg}")]
    Parse { path: PathBuf, line: u64, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unresolved reference: {0}")]
    Reference(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("complete or quasi-complete separation: {0}")]
    Separation(String),

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, line: u64, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, msg: msg.into() }
    }

    /// CLI exit code for this error: 2 for user/config problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Config(_)
            | Error::Reference(_)
            | Error::Invalid(_) => 2,
            Error::Numeric(_) | Error::Separation(_) | Error::RankDeficient(_) => 1,
        }
    }
}
