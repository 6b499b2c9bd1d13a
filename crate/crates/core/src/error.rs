use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("node {node} out of range for graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("node {node} has degree {degree}, but at least {required} is required")]
    DegreeTooLow {
        node: usize,
        degree: usize,
        required: usize,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("not enough points for k-means: {points} points, k = {k}")]
    TooFewPoints { points: usize, k: usize },

    #[error("chain is not ergodic (irreducible: {irreducible}, aperiodic: {aperiodic})")]
    NotErgodic { irreducible: bool, aperiodic: bool },

    #[error("graph is not regular (degrees range from {min} to {max})")]
    NotRegular { min: usize, max: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("no data: {0}")]
    NoData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
