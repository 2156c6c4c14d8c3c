use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller violated a precondition (mismatched dimensions, infeasible caps, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Scenario or plan failed validation.
    #[error("invalid config: {0}")]
    Config(String),

    #[error("deployment generation failed: {0}")]
    Generation(String),

    #[error("utility undefined for user {user}: rate {rate} is not positive")]
    NonPositiveRate { user: usize, rate: f64 },

    #[error("user {user} has zero rate on every base station")]
    UnreachableUser { user: usize },

    #[error(
        "exhaustive search refused: {candidates} candidate associations exceed budget {budget}"
    )]
    BudgetExceeded { candidates: f64, budget: u64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than runtime failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Json(_) | Error::Contract(_) | Error::BudgetExceeded { .. }
        )
    }
}
