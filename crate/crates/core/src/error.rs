//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GvfError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unresolvable id `{id}` in {class} record {index}: {reason}")]
    UnresolvableId {
        class: &'static str,
        index: usize,
        id: String,
        reason: String,
    },

    #[error("timestamps decrease in {class} records at index {index}")]
    TimestampOrder { class: &'static str, index: usize },

    #[error("malformed event record at line {line}: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("training diverged at epoch {epoch} (loss {loss:e})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("integer overflow during exact rank elimination")]
    RankOverflow,

    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),

    #[error("eigen decomposition failed: {0}")]
    EigenFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl GvfError {
    /// Process exit code for CLI use: 2 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            GvfError::NonConvergence { .. } | GvfError::Divergence { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, GvfError>;
