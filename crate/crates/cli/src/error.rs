use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: query `{qid}` has embedding dimension {found}, but query `{first_qid}` has {expected}")]
    DimensionDrift {
        path: PathBuf,
        line: usize,
        first_qid: String,
        qid: String,
        expected: usize,
        found: usize,
    },
    #[error("{path}:{line}: duplicate qid `{qid}`")]
    DuplicateQid {
        path: PathBuf,
        line: usize,
        qid: String,
    },
    #[error("{path}: invalid run file: {message}")]
    InvalidRun { path: PathBuf, message: String },
    #[error("run lists passage `{pid}` for query `{qid}`, which is not in the candidates file")]
    UnknownPassage { qid: String, pid: String },
    #[error("query `{qid}`: {source}")]
    Query {
        qid: String,
        #[source]
        source: dpp_rerank::Error,
    },
    #[error("invalid argument: {0}")]
    Argument(String),
}

pub type CliResult<T> = Result<T, CliError>;
