use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the generator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: cannot parse weight {text:?}")]
    Parse { line: usize, text: String },

    #[error("line {line}: negative weight {value}")]
    NegativeWeight { line: usize, value: f64 },

    #[error("unsorted at line {line}")]
    Unsorted { line: usize },

    #[error("weight sequence is empty")]
    Empty,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inadmissible weights: max weight squared {max_sq} >= sum {sum}")]
    Inadmissible { max_sq: f64, sum: f64 },

    #[error("oracle sampler limited to {cap} nodes, got {n}")]
    OracleCap { n: usize, cap: usize },

    #[error("node index {index} out of range for {n} nodes")]
    NodeOutOfRange { index: u64, n: usize },

    #[error("communicator: {0}")]
    Comm(#[from] CommError),

    #[error("malformed edge file: {0}")]
    EdgeFormat(String),

    #[error("malformed plan file: {0}")]
    PlanFormat(String),
}

/// Failures of the rank communicator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CommError {
    #[error("rank {rank} timed out waiting in {op}")]
    Timeout { rank: usize, op: &'static str },

    #[error("collective mismatch at step {epoch}: rank {rank} called {got}, rank 0 called {expected}")]
    Mismatch {
        epoch: u64,
        rank: usize,
        expected: &'static str,
        got: &'static str,
    },

    #[error("destination rank {to} outside communicator of size {size}")]
    BadRank { to: usize, size: usize },

    #[error("communicator of size {got} cannot run a {expected}-rank plan")]
    SizeMismatch { expected: usize, got: usize },

    #[error("rank {0} panicked")]
    RankPanicked(usize),

    #[error("communicator aborted")]
    Aborted,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
