use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0} has no `label` column; replay, ablate and sweep need ground truth")]
    UnlabeledInput(PathBuf),
    #[error("{0} holds a lock from another run; remove it if no run is active")]
    Busy(PathBuf),
    #[error("{path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] evolad_core::Error),
    #[error(transparent)]
    Service(#[from] evolad_service::ServiceError),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        use evolad_core::Error as E;
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::UnlabeledInput(_) => "unlabeled_input",
            CliError::Busy(_) => "run_in_progress",
            CliError::Write { .. } => "io",
            CliError::Core(E::Config(_)) => "config",
            CliError::Core(E::Csv { .. }) => "csv",
            CliError::Core(E::Io(_)) => "io",
            CliError::Core(_) => "engine",
            CliError::Service(e) => e.code(),
        }
    }

    /// 2 for problems with the invocation itself, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self.code() {
            "usage" | "config" | "unlabeled_input" | "csv" => 2,
            _ => 1,
        }
    }

    /// One-line machine-readable summary for stderr.
    pub fn summary(&self, command: &str) -> String {
        json!({ "error": { "code": self.code(), "command": command, "message": self.to_string() } }).to_string()
    }
}
