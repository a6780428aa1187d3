//! Alignment statistics: item descriptives, RMSE at three levels, correlations, ANOVA.

mod anova;
mod correlation;
mod descriptive;
mod pairs;
mod rmse;
pub mod special;

use thiserror::Error;

pub use anova::{anova3_main_effects, anova_main_effects, AnovaRow, AnovaTable, Observation, PairObservation};
pub use correlation::{
    interview_length_association, pearson, pearson_p_value, Association, Correlation, CorrelationMode,
    CorrelationRegistry, Flattened, PerRespondent,
};
pub use descriptive::{item_stats, ItemStats};
pub use pairs::{chatbot_pairs, design_cells, human_correlations, llm_pair_correlations, HumanCorrelation, MatrixSet, PairCorrelation};
pub use rmse::{check_aligned, item_rmse, person_rmse, test_rmse};

use crate::survey::ScoringError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("respondent sets differ (only in first: {only_left:?}; only in second: {only_right:?})")]
    RespondentMismatch { only_left: Vec<String>, only_right: Vec<String> },
    #[error("item counts differ: {left} vs {right}")]
    ItemCountMismatch { left: usize, right: usize },
    #[error("{0}: no respondents")]
    Empty(String),
    #[error("anova design: {0}")]
    Design(String),
    #[error("unknown correlation mode {name:?} (known: {})", known.join(", "))]
    UnknownMode { name: String, known: Vec<String> },
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}
