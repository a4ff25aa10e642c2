use std::time::Duration;

use bsa_core::SurgeryType;
use thiserror::Error;

use crate::response::ResponseError;

#[derive(Debug, Error)]
pub enum PlanningError {
    #[error("no knowledge-base entry for procedure {0}")]
    UnknownProcedure(SurgeryType),
    #[error("invalid context `{context_id}`: {message}")]
    InvalidContext { context_id: String, message: String },
    #[error("unparseable agent reply after retry: {source}")]
    Parse {
        #[source]
        source: ResponseError,
        raw: String,
    },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited by endpoint (retry after {retry_after:?})")]
    RateLimited { retry_after: Option<Duration> },
    #[error("unknown mock responder `{name}` (known: {known})")]
    UnknownMock { name: String, known: String },
    #[error("prediction log is empty")]
    EmptyLog,
    #[error("k must be 1, 2 or 3, got {0}")]
    InvalidK(usize),
    #[error("duplicate log entry ({context_id}, {t})")]
    DuplicateEntry { context_id: String, t: usize },
    #[error("surgeon choices do not align with the log: {0}")]
    Alignment(String),
    #[error("frame `{reference}`: {message}")]
    Frame { reference: String, message: String },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
