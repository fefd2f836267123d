use std::path::PathBuf;

use thiserror::Error;

use crate::config::ParseIssue;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration parse error:\n{}", join_issues(.0))]
    Parse(Vec<ParseIssue>),

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("unknown experiment '{name}'; valid names: {}", .valid.join(", "))]
    UnknownExperiment {
        name: String,
        valid: Vec<&'static str>,
    },

    #[error(transparent)]
    Solver(#[from] stochhom::Error),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest serialization failed: {0}")]
    Json(#[from] serde_json::Error),

    #[error("thread pool: {0}")]
    Threads(String),
}

fn join_issues(issues: &[ParseIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl CliError {
    /// 2 for bad input, 1 for everything that went wrong while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse(_) | Self::Validation(_) | Self::UnknownExperiment { .. } => 2,
            _ => 1,
        }
    }
}
