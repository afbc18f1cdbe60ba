use easg_core::ValidationReport;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    /// Work that other steps must finish first, e.g. a merge before all
    /// responses are in.
    #[error("incomplete: {}", .missing.join("; "))]
    Incomplete { missing: Vec<String> },
    #[error("submission violates graph invariants: {0}")]
    Invalid(ValidationReport),
    #[error("unprocessable: {0}")]
    Unprocessable(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("no language model is configured")]
    LlmUnavailable,
    #[error("upstream language model failed after {attempts} attempt(s): {message}")]
    Upstream {
        message: String,
        attempts: u32,
        retry_after_ms: Option<u64>,
    },
    #[error("event log: {0}")]
    Io(#[from] std::io::Error),
    #[error("event log line {line}: {message}")]
    CorruptLog { line: usize, message: String },
}
