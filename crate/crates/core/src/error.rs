use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("candidate set must contain at least one passage")]
    EmptyCandidateSet,
    #[error("duplicate passage id `{pid}`")]
    DuplicatePid { pid: String },
    #[error("passage `{pid}` has embedding dimension {found}, expected {expected}")]
    DimensionMismatch {
        pid: String,
        expected: usize,
        found: usize,
    },
    #[error("passage `{pid}` has a zero-norm embedding")]
    ZeroNormEmbedding { pid: String },
    #[error("passage `{pid}` has a non-finite embedding entry")]
    NonFiniteEmbedding { pid: String },
    #[error("passage `{pid}` has a non-finite relevance score")]
    NonFiniteScore { pid: String },
    #[error("quality floor must lie in (0, 1), got {0}")]
    InvalidFloor(f64),
    #[error("ridge must be finite and non-negative, got {0}")]
    InvalidRidge(f64),
    #[error("size mismatch: {what} has {found} entries, expected {expected}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("k = {k} is out of range for {n} candidates")]
    InvalidK { k: usize, n: usize },
    #[error("kernel is not positive semi-definite: residual {residual:e} for candidate {index} after {step} selections")]
    NotPsd {
        index: usize,
        step: usize,
        residual: f64,
    },
    #[error("oracle limited to N <= {max}, got N = {n}")]
    OracleTooLarge { n: usize, max: usize },
    #[error("subset index {index} is invalid or repeated for N = {n}")]
    InvalidSubset { index: usize, n: usize },
    #[error("passage `{pid}` has no text")]
    MissingText { pid: String },
    #[error("question `{qid}` has an invalid answer set: {reason}")]
    InvalidGold { qid: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
