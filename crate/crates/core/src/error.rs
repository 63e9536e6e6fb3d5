use thiserror::Error;

pub type Result<T> = std::result::Result<T, TlrrError>;

#[derive(Debug, Error)]
pub enum TlrrError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("tensor contains non-finite values")]
    NonFinite,

    #[error("transformed tensor was produced by {found}, expected {expected}")]
    SpecMismatch { expected: String, found: String },

    #[error("inverse transform left an imaginary residue of {relative:.3e} (relative)")]
    ImaginaryResidue { relative: f64 },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("bad T3B magic bytes")]
    BadMagic,

    #[error("truncated T3B payload: expected {expected} values, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("T3B dimensions {0:?} overflow the addressable size")]
    DimensionOverflow((u64, u64, u64)),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ndarray_linalg::error::LinalgError> for TlrrError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        TlrrError::Linalg(e.to_string())
    }
}

pub(crate) fn dim_err(msg: impl Into<String>) -> TlrrError {
    TlrrError::DimensionMismatch(msg.into())
}

pub(crate) fn arg_err(msg: impl Into<String>) -> TlrrError {
    TlrrError::InvalidArgument(msg.into())
}
