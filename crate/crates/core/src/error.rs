//! Error types shared across the toolkit.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Failure scoped to a named layer; wraps the underlying cause.
    #[error("layer `{layer}`: {source}")]
    Layer {
        layer: String,
        #[source]
        source: Box<Error>,
    },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("shape mismatch: expected {expected} elements, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("payload size mismatch: expected {expected} bytes, found {found}")]
    PayloadSize { expected: usize, found: usize },

    #[error("non-finite value at element {index}")]
    NonFinite { index: usize },

    #[error("negative activation norm at element {index}")]
    NegativeNorm { index: usize },

    #[error("empty activation matrix")]
    EmptyActivations,

    #[error("invalid N:M pattern {n}:{m}")]
    InvalidPattern { n: u8, m: u8 },

    #[error("pattern violation in column {col}, block {block}: {detail}")]
    PatternViolation {
        col: usize,
        block: usize,
        detail: String,
    },

    #[error("corrupt metadata in column {col}, block {block}: {detail}")]
    CorruptMetadata {
        col: usize,
        block: usize,
        detail: String,
    },

    #[error("planner: {0}")]
    Planner(String),

    #[error("simulator: {0}")]
    Simulator(String),

    #[error("unsupported architecture `{0}`")]
    UnsupportedArch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A violated internal invariant, e.g. a distribution-unit selection that
    /// disagrees with the metadata it was derived from.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Attach a layer name to an error bubbling out of per-layer processing.
    pub fn for_layer(self, layer: impl Into<String>) -> Self {
        Error::Layer {
            layer: layer.into(),
            source: Box::new(self),
        }
    }

    /// True for bugs (violated invariants) as opposed to bad input.
    pub fn is_internal(&self) -> bool {
        match self {
            Error::Internal(_) => true,
            Error::Layer { source, .. } => source.is_internal(),
            _ => false,
        }
    }
}
