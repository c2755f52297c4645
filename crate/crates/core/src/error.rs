use std::path::PathBuf;

use crate::backend::TokenId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid token id {0}")]
    InvalidToken(TokenId),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("sequence of {len} tokens exceeds the context limit of {limit}")]
    ContextOverflow { len: usize, limit: usize },

    /// The cache handle was evicted or never existed; recompute with a full pass.
    #[error("cache miss for handle {0}")]
    CacheMiss(u64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("stale suggestion: revision {revision} rank {rank} does not match the current set (revision {current}, {shown} shown)")]
    StaleSuggestion {
        revision: u64,
        rank: usize,
        current: u64,
        shown: usize,
    },

    #[error("session is finalized")]
    Finalized,

    #[error("{what} {value} is out of bounds (limit {limit})")]
    OutOfBounds {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("document is empty")]
    EmptyDocument,

    #[error("assistant echo does not align with the document tokenization ({echo} vs {document} tokens)")]
    Alignment { echo: usize, document: usize },

    #[error("session has not been finalized")]
    IncompleteSession,

    #[error("log corruption: {0}")]
    LogCorruption(String),

    #[error("replay diverged at seq {seq}: {detail}")]
    ReplayMismatch { seq: u64, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("backend error: {0}")]
    Backend(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
