use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point outside domain: {0}")]
    Domain(String),

    #[error("duplicate snapshot states at rows {0} and {1}")]
    DuplicateState(usize, usize),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("matrix is not positive definite beyond tolerance (eigenvalue {eigenvalue:e})")]
    Indefinite { eigenvalue: f64 },

    #[error("degenerate direction: {0}")]
    Degenerate(String),

    #[error("numerical rank is zero")]
    RankZero,

    #[error("certificate unavailable: dG = {dg:e} >= sigma_inf = {sigma:e}")]
    CertificateUnavailable { dg: f64, sigma: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
