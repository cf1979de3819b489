use thiserror::Error;

/// Errors raised by the simulator and the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("bond index {bond} out of range for a chain of {len} sites")]
    InvalidBond { bond: usize, len: usize },

    #[error("site index {site} out of range for a chain of {len} sites")]
    InvalidSite { site: usize, len: usize },

    #[error("matter sector N_M = {n_matter} is empty for L = {len}")]
    EmptySector { len: usize, n_matter: u32 },

    #[error("bond spaces do not match: {0}")]
    BondMismatch(String),

    #[error("operator does not match the physical basis: {0}")]
    BasisMismatch(String),

    #[error("null state: all singular values vanish")]
    NullState,

    #[error("chain length {len} exceeds the configured cap {cap}")]
    CapExceeded { len: usize, cap: usize },

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("record keys do not match: {0}")]
    KeyMismatch(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
