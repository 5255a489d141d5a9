use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic bytes {found:?}, expected \"TSR1\"")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported dtype code {0} (expected 0 = f32 or 1 = f64)")]
    BadDtype(u8),

    #[error("dtype mismatch: file holds code {found}, caller expects code {expected}")]
    DtypeMismatch { expected: u8, found: u8 },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("{0} trailing bytes after tensor payload")]
    TrailingBytes(usize),

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("invalid shape {shape:?}: {reason}")]
    InvalidShape { shape: Vec<usize>, reason: String },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("grid is not square: {0:?}")]
    NotSquare(Vec<usize>),

    #[error("grid is not cubic: {0:?}")]
    NotCubic(Vec<usize>),

    #[error("angle must be finite, got {0}")]
    NonFiniteAngle(f64),

    #[error("small angle {0} deg outside [-45, 45]")]
    AngleOutOfRange(f64),

    #[error("matrix is not a rotation (orthogonality/determinant error {0:e})")]
    NotARotation(f64),

    #[error("malformed netpbm header: {0}")]
    PnmHeader(String),

    #[error("unsupported netpbm maxval {0} (only 255)")]
    PnmMaxval(u32),

    #[error("short netpbm pixel data: expected {expected} bytes, found {found}")]
    PnmShortData { expected: usize, found: usize },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
