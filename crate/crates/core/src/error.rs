use std::path::PathBuf;

use thiserror::Error;

/// A single failed configuration or data check, with the path of the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl Issue {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Issue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum BccError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("validation failed: {}", join_issues(.0))]
    Validation(Vec<Issue>),

    #[error("numerical failure in {context}: {message}")]
    Numerical { context: String, message: String },

    #[error("chain {chain} aborted at iteration {iteration}: {source}")]
    Chain {
        chain: usize,
        iteration: usize,
        #[source]
        source: Box<BccError>,
    },

    #[error("fit with K = {k} failed: {source}")]
    AtK {
        k: usize,
        #[source]
        source: Box<BccError>,
    },

    #[error("degenerate chain: {0}")]
    DegenerateChain(String),

    #[error("chain too short: {len} values, at least {min} required")]
    ChainTooShort { len: usize, min: usize },

    #[error("classification probabilities missing from draws; re-run the fit with probability recording enabled")]
    MissingProbabilities,

    #[error("{0}")]
    Invalid(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

fn join_issues(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl BccError {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        BccError::Validation(vec![Issue::new(path, message)])
    }

    pub fn numerical(context: impl Into<String>, message: impl Into<String>) -> Self {
        BccError::Numerical {
            context: context.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BccError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for bad input, 3 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            BccError::Parse { .. }
            | BccError::Validation(_)
            | BccError::Invalid(_)
            | BccError::Json(_)
            | BccError::MissingProbabilities => 2,
            BccError::AtK { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, BccError>;
