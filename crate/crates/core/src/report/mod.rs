//! Workspace configuration, the four pipeline commands and CSV report emission.

mod commands;
mod config;
mod tables;

use std::fmt;

use thiserror::Error;

pub use commands::{cmd_metrics, cmd_simulate, cmd_tokenize, cmd_validate, MetricsOptions, MetricsOutcome, SimulateOptions};
pub use config::{WorkspaceConfig, CONFIG_ENV, DEFAULT_CONFIG_FILE};
pub use tables::{compute_report, write_report, ConditionReport, MetricsReport, NA};

use crate::runner::{Finding, RunnerError};

#[derive(Debug, Error)]
pub enum AppError {
    /// Inputs failed load-time validation.
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<Finding>),
    #[error("{0}")]
    Runtime(String),
    /// The store lacks terminal records and partial output was not requested.
    #[error("store is incomplete ({} missing run keys); rerun simulate with --resume or pass --partial:\n{}", gaps.len(), gaps.join("\n"))]
    Partial { gaps: Vec<String> },
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Validation(_) => 1,
            AppError::Runtime(_) => 2,
            AppError::Partial { .. } => 3,
        }
    }

    pub(crate) fn runtime(e: impl fmt::Display) -> Self {
        AppError::Runtime(e.to_string())
    }
}

/// Any load error as validation findings, attributed to `source` when the
/// error carries no location of its own.
pub(crate) fn load_findings(e: RunnerError, source: &std::path::Path) -> Vec<Finding> {
    let findings = e.findings();
    if findings.is_empty() {
        vec![Finding::new(source.display().to_string(), e)]
    } else {
        findings
    }
}

impl From<RunnerError> for AppError {
    fn from(e: RunnerError) -> Self {
        let findings = e.findings();
        if findings.is_empty() {
            AppError::Runtime(e.to_string())
        } else {
            AppError::Validation(findings)
        }
    }
}

impl From<crate::metrics::MetricsError> for AppError {
    fn from(e: crate::metrics::MetricsError) -> Self {
        AppError::runtime(e)
    }
}

impl From<crate::prompt::PromptError> for AppError {
    fn from(e: crate::prompt::PromptError) -> Self {
        RunnerError::from(e).into()
    }
}
