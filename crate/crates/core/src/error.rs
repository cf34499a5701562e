use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },
    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },
    #[error("unknown class name `{0}`")]
    UnknownClass(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("solver aborted at iteration {iteration} (lr = {lr:e}): {what} is not finite")]
    Diverged {
        iteration: usize,
        lr: f64,
        what: &'static str,
    },
    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("truth contains only one class; ROC analysis needs at least one positive and one negative")]
    SingleClass,
    #[error("labeler returned {got} verdicts for {expected} submitted records")]
    VerdictCount { expected: usize, got: usize },
    #[error("verdict for record `{0}` which was not submitted")]
    VerdictMismatch(String),
    #[error("unknown record `{0}`")]
    UnknownRecord(String),
    #[error("record `{0}` was already reported")]
    DuplicateReport(String),
    #[error("missed-failure reports must name an anomaly class, not normal")]
    NormalReport,
    #[error("csv row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("weights snapshot line {line}: {message}")]
    Snapshot { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(
        context: &'static str,
        expected: impl ToString,
        found: impl ToString,
    ) -> Self {
        Error::ShapeMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
