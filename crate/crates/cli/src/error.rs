use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("unknown experiment `{name}`{}", suggestion_text(.suggestion))]
    UnknownExperiment { name: String, suggestion: Option<String> },
    #[error("numerical failure in {module}::{op}: {source}")]
    Numerical { module: &'static str, op: &'static str, source: precond_risk::Error },
    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", .path.display())]
    Csv { path: PathBuf, source: csv::Error },
}

fn suggestion_text(s: &Option<String>) -> String {
    match s {
        Some(name) => format!(" (did you mean `{name}`?)"),
        None => String::new(),
    }
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl ToString) -> Self {
        CliError::Config { path: path.into(), message: message.to_string() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 for configuration and input errors, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::UnknownExperiment { .. } | CliError::MissingColumn { .. } => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io { .. } | CliError::Csv { .. } => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attaches the producing module and operation to a library error.
///
/// Numerical failures map to exit code 3; anything else means the
/// configuration asked for something the library rejects.
pub fn at<T>(module: &'static str, op: &'static str, r: precond_risk::Result<T>) -> CliResult<T> {
    r.map_err(|e| {
        if e.is_numerical() {
            CliError::Numerical { module, op, source: e }
        } else {
            CliError::config(format!("pipeline ({module}::{op})"), e)
        }
    })
}
