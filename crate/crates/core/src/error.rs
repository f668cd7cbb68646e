use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by graph, kernel, filter and training operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}:{line}: {message}")]
    Load {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    #[error("zero degree at node {node}")]
    ZeroDegree { node: usize },

    #[error("degenerate bandwidth: all attribute rows are identical")]
    DegenerateBandwidth,

    #[error("not PSD: minimum eigenvalue {min_eigenvalue:e} below -{tolerance:e}")]
    NotPsd { min_eigenvalue: f64, tolerance: f64 },

    #[error("matrix is not symmetric: max asymmetry {0:e}")]
    NotSymmetric(f64),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("lambda {lambda} outside the domain [{lo}, {hi}] of filter {filter}")]
    Domain {
        filter: String,
        lambda: f64,
        lo: f64,
        hi: f64,
    },

    #[error("empty set: {0}")]
    EmptySet(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("degenerate normalization: kernel row {row} sums to {sum:e}")]
    DegenerateNormalization { row: usize, sum: f64 },

    #[error("loss became NaN at epoch {epoch}")]
    NanLoss { epoch: usize },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("gamma = {gamma}: {source}")]
    GammaSelection {
        gamma: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn load(file: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Load {
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}
