use serde::Serialize;
use thiserror::Error;

/// Errors surfaced by the command-line front end.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("cannot parse `{value}` in column `{column}` at data row {row}")]
    Parse { column: String, row: usize, value: String },

    #[error("missing values in column `{column}` at data rows {rows:?}")]
    MissingValues { column: String, rows: Vec<usize> },

    #[error("{0}")]
    Estimation(#[from] tobitm::Error),
}

/// Machine-readable form written to stderr on failure.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub schema_version: u32,
    pub kind: &'static str,
    pub module: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    /// 1 for bad input or flags, 2 when the numerics fail on valid input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Estimation(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }

    pub fn report(&self) -> ErrorReport {
        let (kind, module) = match self {
            CliError::Usage(_) => ("usage", "cli-io"),
            CliError::Io { .. } => ("io", "cli-io"),
            CliError::MissingColumn(_) | CliError::Parse { .. } | CliError::MissingValues { .. } => ("input", "cli-io"),
            CliError::Estimation(e) => (if e.is_numerical() { "numerical" } else { "input" }, e.stage().as_str()),
        };
        ErrorReport { schema_version: crate::SCHEMA_VERSION, kind, module, message: self.to_string(), exit_code: self.exit_code() }
    }
}

pub type CliResult<T> = Result<T, CliError>;
