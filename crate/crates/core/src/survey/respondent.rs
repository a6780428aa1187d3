//! Respondent roster: one JSON object per line.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{SurveyError, SurveyInstrument};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Respondent {
    pub respondent_id: String,
    #[serde(default)]
    pub interview_transcript: String,
    #[serde(default)]
    pub demographics: IndexMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed_ratings: Option<Vec<i32>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Roster {
    pub respondents: Vec<Respondent>,
}

impl Roster {
    pub fn new(respondents: Vec<Respondent>) -> Self {
        Self { respondents }
    }

    pub fn from_jsonl_str(text: &str, source_name: &str) -> Result<Self, SurveyError> {
        let mut respondents = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: Respondent = serde_json::from_str(line).map_err(|e| SurveyError::Format {
                source_name: format!("{source_name}:{}", n + 1),
                message: e.to_string(),
            })?;
            respondents.push(r);
        }
        Ok(Self { respondents })
    }

    pub fn load(path: &Path) -> Result<Self, SurveyError> {
        let text = std::fs::read_to_string(path).map_err(|e| SurveyError::io(path, e))?;
        Self::from_jsonl_str(&text, &path.display().to_string())
    }

    pub fn get(&self, respondent_id: &str) -> Option<&Respondent> {
        self.respondents.iter().find(|r| r.respondent_id == respondent_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.respondents.iter().map(|r| r.respondent_id.as_str())
    }

    pub fn len(&self) -> usize {
        self.respondents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.respondents.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RosterViolation {
    EmptyId { record: usize },
    DuplicateId { record: usize, respondent_id: String },
    RatingCount { respondent_id: String, expected: usize, found: usize },
    RatingOutOfRange { respondent_id: String, item_id: usize, rating: i32, min: i32, max: i32 },
}

impl fmt::Display for RosterViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RosterViolation::EmptyId { record } => write!(f, "record {record}: empty respondent_id"),
            RosterViolation::DuplicateId { record, respondent_id } => {
                write!(f, "record {record}: duplicate respondent_id {respondent_id}")
            }
            RosterViolation::RatingCount { respondent_id, expected, found } => write!(
                f,
                "respondent {respondent_id}: observed_ratings has {found} entries, expected {expected}"
            ),
            RosterViolation::RatingOutOfRange { respondent_id, item_id, rating, min, max } => write!(
                f,
                "respondent {respondent_id}: item {item_id} rating {rating} outside [{min}, {max}]"
            ),
        }
    }
}

/// Record numbers in violations are 1-based positions in the roster.
pub fn validate_roster(roster: &Roster, instrument: &SurveyInstrument) -> Vec<RosterViolation> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let scale = &instrument.scale;
    for (i, r) in roster.respondents.iter().enumerate() {
        let record = i + 1;
        if r.respondent_id.trim().is_empty() {
            out.push(RosterViolation::EmptyId { record });
        } else if !seen.insert(r.respondent_id.as_str()) {
            out.push(RosterViolation::DuplicateId { record, respondent_id: r.respondent_id.clone() });
        }
        if let Some(ratings) = &r.observed_ratings {
            if ratings.len() != instrument.item_count() {
                out.push(RosterViolation::RatingCount {
                    respondent_id: r.respondent_id.clone(),
                    expected: instrument.item_count(),
                    found: ratings.len(),
                });
            }
            for (k, &rating) in ratings.iter().enumerate() {
                if !scale.contains(rating) {
                    out.push(RosterViolation::RatingOutOfRange {
                        respondent_id: r.respondent_id.clone(),
                        item_id: k + 1,
                        rating,
                        min: scale.min_rating,
                        max: scale.max_rating,
                    });
                }
            }
        }
    }
    out
}
