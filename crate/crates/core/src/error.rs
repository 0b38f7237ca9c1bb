use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected} values, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("instance too large for the LP solver ({support} atoms > {limit}); use w2_quantile on 1-D spaces")]
    SizeGuard { support: usize, limit: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("configuration error: {0}")]
    Config(String),
}
