use thiserror::Error;

/// Errors produced by the decomposition library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dictionary column {0} is identically zero")]
    ZeroAtom(usize),

    #[error("Gram matrix is ill-conditioned (condition number {condition:e}, limit {limit:e})")]
    IllConditioned { condition: f64, limit: f64 },

    #[error("descent diverged at stage {stage}, iteration {iteration}: {quantity} is not finite")]
    Diverged {
        stage: usize,
        iteration: usize,
        quantity: &'static str,
    },

    #[error("SNR is undefined for an all-zero reference vector")]
    ZeroReference,

    #[error("expanded dictionary needs {entries} entries, above the limit of {limit}")]
    TooLarge { entries: usize, limit: usize },

    #[error("malformed {format}: {message}")]
    Parse {
        format: &'static str,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
