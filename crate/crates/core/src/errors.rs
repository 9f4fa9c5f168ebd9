//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Errors produced while loading data or computing statistics.
#[derive(Debug, thiserror::Error)]
pub enum PoolstatError {
    /// A line of an input file could not be interpreted.
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("cannot read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("topic {topic}: document {doc} appears more than once")]
    DuplicateDocument { topic: String, doc: String },

    #[error("relevance level {0} is outside 0..=2")]
    InvalidLevel(i64),

    #[error("unknown assessor {0}")]
    UnknownAssessor(String),

    #[error("unknown qrels version {0}")]
    UnknownVersion(String),

    #[error("no run covers topic {0}")]
    TopicNotCovered(String),

    #[error("measure undefined for topic {0}: it has no relevant documents")]
    NoRelevantDocuments(String),

    #[error("ranked list is empty")]
    EmptyRanking,

    #[error("no unit carries two or more labels")]
    NoPairableUnits,

    #[error("kappa undefined: expected disagreement is zero")]
    DegenerateKappa,

    #[error("team {0} has no runs")]
    EmptyTeam(String),

    #[error("run {0} has no team assignment")]
    UnmappedRun(String),

    #[error("topic set is empty")]
    EmptyTopicSet,

    #[error("numerical integration did not converge: {0}")]
    Quadrature(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl PoolstatError {
    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Self::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Self::InvalidArgument(message.into())
    }
}

pub type Result<T, E = PoolstatError> = std::result::Result<T, E>;
