use thiserror::Error;

/// Errors raised while validating data or fitting models.
#[derive(Debug, Error)]
pub enum CoxError {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear predictor overflow: |beta'z| = {value:.3e} exceeds {limit}")]
    LinearPredictorOverflow { value: f64, limit: f64 },

    #[error("{stage} did not converge after {iterations} iterations")]
    NonConvergence { stage: &'static str, iterations: usize },

    #[error("singular information matrix in {0}")]
    Singular(&'static str),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CoxError {
    /// True for failures caused by the input data rather than the numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            CoxError::InvalidData(_) | CoxError::Csv(_) | CoxError::Io(_) | CoxError::Json(_)
        )
    }

    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            CoxError::LinearPredictorOverflow { .. }
                | CoxError::NonConvergence { .. }
                | CoxError::Singular(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, CoxError>;
