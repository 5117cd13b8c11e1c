use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("incompatible shapes in {op}: expected {expected}, found {found}")]
    Shape {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("node {node} has an all-zero feature row; the {kernel} kernel needs nonzero norms")]
    ZeroNorm { kernel: &'static str, node: usize },

    #[error("non-finite value in {what} at ({row}, {col})")]
    NonFinite {
        what: &'static str,
        row: usize,
        col: usize,
    },

    #[error("negative variance {value} on the diagonal at node {node}")]
    NegativeDiagonal { node: usize, value: f64 },

    #[error("Cholesky factorization failed; last jitter tried was {jitter:e}")]
    Factorization { jitter: f64 },

    #[error("node {0} has no label")]
    MissingLabel(usize),

    #[error("Monte-Carlo covariance needs at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("Monte-Carlo validation requires the inner-product base kernel, got {0}")]
    UnsupportedBaseKernel(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::Shape {
            op,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
