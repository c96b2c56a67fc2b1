use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error("step {index}: {source}")]
    Step {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("{what} is not unitary (deviation {deviation:.3e})")]
    NotUnitary { what: String, deviation: f64 },

    #[error("{what} is not unit norm (norm {norm})")]
    NotNormalized { what: String, norm: f64 },

    #[error("{0} has zero norm")]
    ZeroNorm(String),

    #[error("not a purely sequential protocol: {0}; use the PEPS builder for rescattering")]
    NotSequential(String),

    #[error("target is not left-canonical (deviation {deviation:.3e}); canonicalize it first")]
    NotCanonical { deviation: f64 },

    #[error("target is not translation invariant: site {site} differs from site 1")]
    NotTranslationInvariant { site: usize },

    #[error(
        "scatter event {event}: walk visits photon {expected}, protocol scatters photon {got}"
    )]
    WalkMismatch {
        event: usize,
        expected: usize,
        got: usize,
    },

    #[error("invalid walk: {0}")]
    InvalidWalk(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid PEPS: {0}")]
    InvalidPeps(String),

    #[error("invalid MPS: {0}")]
    InvalidMps(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_step(self, index: usize) -> Error {
        Error::Step {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
