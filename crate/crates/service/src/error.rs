use thiserror::Error;

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown record `{0}`")]
    UnknownRecord(String),
    #[error("record `{0}` already has a verdict")]
    DuplicateVerdict(String),
    #[error("record `{0}` was already ingested")]
    DuplicateRecord(String),
    #[error("record `{0}` was already reported as missed")]
    DuplicateReport(String),
    #[error("verification of record `{0}` closed when its epoch timed out")]
    VerificationClosed(String),
    #[error("record `{0}` cannot be reported as missed: only records predicted normal and never flagged can")]
    NotReportable(String),
    #[error("unknown class `{0}`")]
    InvalidClass(String),
    #[error("missed-failure reports must name an anomaly class, not normal")]
    NormalReport,
    #[error("schema mismatch: {message}")]
    Schema {
        message: String,
        /// First attribute that did not line up with the configured schema.
        attribute: Option<String>,
    },
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("event log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error(transparent)]
    Core(#[from] evolad_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ServiceError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownRecord(_) => "unknown_record",
            ServiceError::DuplicateVerdict(_) => "duplicate_verdict",
            ServiceError::DuplicateRecord(_) => "duplicate_record",
            ServiceError::DuplicateReport(_) => "duplicate_report",
            ServiceError::VerificationClosed(_) => "verification_closed",
            ServiceError::NotReportable(_) => "not_reportable",
            ServiceError::InvalidClass(_) => "invalid_class",
            ServiceError::NormalReport => "normal_report",
            ServiceError::Schema { .. } => "schema_mismatch",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Config(_) => "config",
            ServiceError::Log { .. } => "event_log",
            ServiceError::Core(_) => "engine",
            ServiceError::Io(_) => "io",
        }
    }

    /// HTTP status for the error.
    pub fn status(&self) -> u16 {
        match self {
            ServiceError::UnknownRecord(_) => 404,
            ServiceError::DuplicateVerdict(_)
            | ServiceError::DuplicateRecord(_)
            | ServiceError::DuplicateReport(_)
            | ServiceError::VerificationClosed(_)
            | ServiceError::NotReportable(_) => 409,
            ServiceError::InvalidClass(_) | ServiceError::NormalReport => 422,
            ServiceError::Schema { .. } | ServiceError::BadRequest(_) => 400,
            ServiceError::Config(_) | ServiceError::Log { .. } | ServiceError::Core(_) | ServiceError::Io(_) => 500,
        }
    }
}
