//! Interview-informed LLM survey simulation and alignment metrics.
//!
//! - [`survey`]: instruments, respondents, response matrices, RAI scoring
//! - [`prompt`]: prompt variants, templates, token counting
//! - [`gateway`]: provider adapters, retry and rate limiting, rating extraction
//! - [`runner`]: factorial design, batch execution, the run store
//! - [`metrics`]: item statistics, RMSE, correlations, ANOVA
//! - [`report`]: workspace config and the command implementations behind the CLI

pub mod gateway;
pub mod metrics;
pub mod prompt;
pub mod report;
pub mod runner;
pub mod seed;
pub mod survey;
