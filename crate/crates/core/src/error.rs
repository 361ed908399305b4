use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("no split index satisfies the effective-rank inequality (lambda = {lambda_reg}, n = {n})")]
    NoKStar { lambda_reg: f64, n: usize },

    #[error("regularization {lambda_reg} is outside the admissible domain (smallest Gram eigenvalue {min_eig}, floor {floor})")]
    SingularRegularization {
        lambda_reg: f64,
        min_eig: f64,
        floor: f64,
    },

    #[error("decomposition scalar S = {0} is not positive")]
    DegenerateS(f64),

    #[error("solution vector has zero norm")]
    ZeroSolution,

    #[error("need at least {required} trials for quantile level {eps}, got {got}")]
    TooFewTrials { required: usize, got: usize, eps: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that mark a single Monte-Carlo trial as degenerate
    /// rather than invalidating the whole experiment.
    pub fn is_degenerate_trial(&self) -> bool {
        matches!(
            self,
            Error::SingularRegularization { .. } | Error::DegenerateS(_) | Error::ZeroSolution
        )
    }
}
