//! Factorial design enumeration, batch execution and the run store.

mod collect;
mod condition;
mod execute;
mod manifest;
mod store;

use std::fmt;
use std::path::Path;

use thiserror::Error;

pub use collect::{aggregate_repeats, collect_matrix, CollectedMatrix, Exclusion};
pub use condition::{Condition, Temperature};
pub use execute::{build_gateways, execute_run, key_seed, Experiment, Gateways, RunOptions, RunSummary};
pub use manifest::{enumerate_conditions, ManifestPaths, ManifestViolation, RunManifest};
pub use store::{RunKey, RunRecord, RunStatus, RunStore};

use crate::gateway::GatewayError;
use crate::prompt::PromptError;
use crate::survey::SurveyError;

/// One validation problem, attributed to the file or document it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub source: String,
    pub message: String,
}

impl Finding {
    pub fn new(source: impl Into<String>, message: impl fmt::Display) -> Self {
        Self { source: source.into(), message: message.to_string() }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.source, self.message)
    }
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{source_name}: {message}")]
    Format { source_name: String, message: String },
    #[error("{source_name}: {}", violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Manifest { source_name: String, violations: Vec<ManifestViolation> },
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Finding>),
    #[error(transparent)]
    Survey(#[from] SurveyError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("store {path}: {message}")]
    Store { path: String, message: String },
    #[error("condition {condition} has no ok records")]
    EmptyMatrix { condition: String, exclusions: Vec<Exclusion> },
    #[error("no provider configured for chatbot {0}")]
    MissingProvider(String),
}

impl RunnerError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        RunnerError::Io { path: path.display().to_string(), source }
    }

    /// Validation findings carried by this error, if it is a validation error.
    pub fn findings(&self) -> Vec<Finding> {
        match self {
            RunnerError::Invalid(f) => f.clone(),
            RunnerError::Manifest { source_name, violations } => {
                violations.iter().map(|v| Finding::new(source_name, v)).collect()
            }
            RunnerError::Format { source_name, message } => vec![Finding::new(source_name, message)],
            RunnerError::Survey(SurveyError::Format { source_name, message }) => {
                vec![Finding::new(source_name, message)]
            }
            RunnerError::Prompt(PromptError::Template(v)) => v.iter().map(|x| Finding::new("template", x)).collect(),
            RunnerError::Gateway(GatewayError::Config { provider, message }) => vec![Finding::new(provider, message)],
            _ => Vec::new(),
        }
    }
}
