use std::path::PathBuf;

use fvmc::mdp::Finding;
use serde_json::{json, Value};
use thiserror::Error;

use crate::io::FORMAT_VERSION;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{context}: {} finding(s)", findings.len())]
    Validation { context: String, findings: Vec<Finding> },

    #[error(transparent)]
    Core(#[from] fvmc::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Parse { path: path.into(), message: message.to_string() }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Validation { .. } => "validation",
            CliError::Core(e) => match e {
                fvmc::Error::InvalidMdp(_) => "validation",
                fvmc::Error::Document(_) | fvmc::Error::Parse(_) | fvmc::Error::Json(_) => "parse",
                fvmc::Error::Io(_) => "io",
                fvmc::Error::Argument(_) => "argument",
                _ => "runtime",
            },
        }
    }

    /// The error document written to stderr.
    pub fn to_json(&self) -> Value {
        let mut error = json!({ "kind": self.kind(), "message": self.to_string() });
        let findings = match self {
            CliError::Validation { findings, .. } => Some(findings.clone()),
            CliError::Core(fvmc::Error::InvalidMdp(report)) => Some(report.findings.clone()),
            _ => None,
        };
        if let Some(f) = findings {
            error["findings"] = serde_json::to_value(f).expect("findings serialize");
        }
        json!({ "format_version": FORMAT_VERSION, "error": error })
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
