use thiserror::Error;

/// Errors raised by estimation, testing and table handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    /// ψ̂ cannot be formed because one of the residual variances is zero.
    #[error("psi estimate undefined: residual variance (sigma_eps2 = {sigma_eps2}, sigma_eta2 = {sigma_eta2}) is zero")]
    UndefinedPsi { sigma_eps2: f64, sigma_eta2: f64 },

    #[error("z^2 modification is degenerate: {0}")]
    ModificationDegenerate(String),

    #[error("regressors are rank deficient (relative determinant {0:e})")]
    RankDeficient(f64),

    #[error("zero residual variance: {0}")]
    ZeroVariance(String),

    #[error("table error: {0}")]
    Table(String),

    #[error("no feasible alpha1 candidate: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
