use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("divisibility error: M={m} is not a multiple of p={p}")]
    Divisibility { m: usize, p: usize },

    #[error("out of range: {0}")]
    Range(String),

    #[error("incomplete input: {0}")]
    IncompleteInput(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("shard {shard} failed: {source}")]
    Shard {
        shard: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code for the command-line tool.
    ///
    /// | code | meaning |
    /// |------|---------|
    /// | 1 | I/O failure |
    /// | 2 | usage or validation |
    /// | 3 | parse |
    /// | 4 | numeric or shape |
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 1,
            Error::InvalidArgument(_) | Error::Divisibility { .. } => 2,
            Error::Parse { .. } => 3,
            Error::Shape(_) | Error::Range(_) | Error::IncompleteInput(_) => 4,
            Error::Shard { source, .. } => source.exit_code(),
        }
    }
}
