use std::collections::BTreeSet;
use std::fmt;

use indexmap::IndexMap;

use super::{Roster, SurveyError, SurveyInstrument};
use crate::runner::Condition;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MatrixSource {
    Human,
    Condition(Condition),
}

impl fmt::Display for MatrixSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixSource::Human => f.write_str("human"),
            MatrixSource::Condition(c) => write!(f, "{c}"),
        }
    }
}

/// Persons × items rating grid for one source. Rows keep insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    source: MatrixSource,
    item_count: usize,
    rows: IndexMap<String, Vec<i32>>,
}

impl ResponseMatrix {
    /// Builds a matrix, checking row lengths and scale bounds against `instrument`.
    pub fn new<I>(source: MatrixSource, instrument: &SurveyInstrument, rows: I) -> Result<Self, SurveyError>
    where
        I: IntoIterator<Item = (String, Vec<i32>)>,
    {
        let matrix = Self::with_item_count(source, instrument.item_count(), rows)?;
        let scale = &instrument.scale;
        for (id, row) in &matrix.rows {
            if let Some((k, &r)) = row.iter().enumerate().find(|(_, r)| !scale.contains(**r)) {
                return Err(SurveyError::Matrix(format!(
                    "respondent {id}: item {} rating {r} outside [{}, {}]",
                    k + 1,
                    scale.min_rating,
                    scale.max_rating
                )));
            }
        }
        Ok(matrix)
    }

    /// Builds a matrix checking only the shape.
    pub fn with_item_count<I>(source: MatrixSource, item_count: usize, rows: I) -> Result<Self, SurveyError>
    where
        I: IntoIterator<Item = (String, Vec<i32>)>,
    {
        let mut map = IndexMap::new();
        for (id, row) in rows {
            if row.len() != item_count {
                return Err(SurveyError::Matrix(format!(
                    "respondent {id}: {} ratings, expected {item_count}",
                    row.len()
                )));
            }
            if map.insert(id.clone(), row).is_some() {
                return Err(SurveyError::Matrix(format!("respondent {id} appears twice")));
            }
        }
        Ok(Self { source, item_count, rows: map })
    }

    /// Observed ratings of every roster respondent that has them.
    pub fn human(roster: &Roster, instrument: &SurveyInstrument) -> Result<Self, SurveyError> {
        let rows = roster
            .respondents
            .iter()
            .filter_map(|r| r.observed_ratings.as_ref().map(|v| (r.respondent_id.clone(), v.clone())));
        Self::new(MatrixSource::Human, instrument, rows)
    }

    pub fn source(&self) -> &MatrixSource {
        &self.source
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn n_respondents(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[i32])> {
        self.rows.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn row(&self, respondent_id: &str) -> Option<&[i32]> {
        self.rows.get(respondent_id).map(Vec::as_slice)
    }

    pub fn respondent_ids(&self) -> impl Iterator<Item = &str> {
        self.rows.keys().map(String::as_str)
    }

    pub fn id_set(&self) -> BTreeSet<&str> {
        self.rows.keys().map(String::as_str).collect()
    }

    /// Column `item_idx` (0-based) in row order.
    pub fn column(&self, item_idx: usize) -> impl Iterator<Item = i32> + '_ {
        self.rows.values().map(move |r| r[item_idx])
    }

    /// Keeps only rows whose id is in `ids`, preserving order.
    pub fn restricted_to(&self, ids: &BTreeSet<&str>) -> Self {
        Self {
            source: self.source.clone(),
            item_count: self.item_count,
            rows: self
                .rows
                .iter()
                .filter(|(k, _)| ids.contains(k.as_str()))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// Row-major flattening, rows ordered by respondent id.
    pub fn flattened_by_id(&self) -> Vec<f64> {
        let mut ids: Vec<&String> = self.rows.keys().collect();
        ids.sort();
        ids.into_iter().flat_map(|id| self.rows[id].iter().map(|&r| f64::from(r))).collect()
    }
}
