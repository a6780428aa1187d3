//! Survey instruments, respondents, response matrices and scoring.

mod instrument;
mod matrix;
mod respondent;
mod scoring;

use std::path::Path;

use thiserror::Error;

pub use instrument::{
    validate_instrument, LikertScale, Subscale, SurveyInstrument, SurveyItem, ValidationReport, Valence,
    Violation,
};
pub use matrix::{MatrixSource, ResponseMatrix};
pub use respondent::{validate_roster, Respondent, Roster, RosterViolation};
pub use scoring::{rai, subscale_mean, ScoringError};

#[derive(Debug, Error)]
pub enum SurveyError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{source_name}: {message}")]
    Format { source_name: String, message: String },
    #[error("response matrix: {0}")]
    Matrix(String),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

impl SurveyError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        SurveyError::Io { path: path.display().to_string(), source }
    }
}
