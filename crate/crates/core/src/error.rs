use thiserror::Error;

use crate::grid::Domain;

#[derive(Debug, Error)]
pub enum Error {
    #[error("expected a grid in the {expected:?} domain, got {actual:?}")]
    DomainMismatch { expected: Domain, actual: Domain },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("curvelet geometry infeasible: {0}")]
    Geometry(String),

    #[error("sampling mask has no sampled locations")]
    EmptyMask,

    #[error("sampling infeasible: {0}")]
    Sampling(String),

    #[error("structured reconstruction needs a fully-sampled center region of at least {required:?}, mask has {actual:?}")]
    FsrTooSmall {
        required: (usize, usize),
        actual: Option<(usize, usize)>,
    },

    #[error("dictionary mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// True when the error came from a numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
