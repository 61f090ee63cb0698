use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("duplicate document id `{0}`")]
    DuplicateId(String),

    #[error("invalid document id `{0}`: ids must be non-empty and contain no tab, comma or newline")]
    InvalidId(String),

    #[error("unknown document id `{0}`")]
    UnknownDocument(String),

    #[error("labeled pair #{index} (query `{query}`) refers to unknown document `{doc_id}`")]
    UnresolvedPair {
        index: usize,
        query: String,
        doc_id: String,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("inconsistent counts: {0}")]
    InconsistentCounts(String),

    #[error("corpus has {corpus} documents, need more than {needed}")]
    CorpusTooSmall { corpus: usize, needed: usize },

    #[error("{what} requires {table}")]
    MissingTable { what: &'static str, table: &'static str },

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn parse(path: &str, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            msg: msg.into(),
        }
    }
}
