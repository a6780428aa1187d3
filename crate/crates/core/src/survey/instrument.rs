//! Survey instrument definition and structural validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SurveyError;

const BREQ_DEFINITION: &str = include_str!("../../../../data/breq.toml");

/// Ordinal rating scale with one label per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikertScale {
    pub min_rating: i32,
    pub max_rating: i32,
    #[serde(default)]
    pub labels: Vec<String>,
}

impl LikertScale {
    pub fn contains(&self, rating: i32) -> bool {
        (self.min_rating..=self.max_rating).contains(&rating)
    }

    pub fn points(&self) -> usize {
        (self.max_rating - self.min_rating + 1).max(0) as usize
    }

    /// Midpoint of the scale, doubled so it stays integral.
    pub fn midpoint_x2(&self) -> i64 {
        i64::from(self.min_rating) + i64::from(self.max_rating)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Valence {
    Positive,
    Negative,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyItem {
    pub item_id: u32,
    pub text: String,
    #[serde(rename = "subscale")]
    pub subscale_id: String,
    #[serde(default, rename = "valence", skip_serializing_if = "Option::is_none")]
    pub valence_tag: Option<Valence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subscale {
    pub subscale_id: String,
    pub item_ids: Vec<u32>,
    /// Coefficient of this subscale in the relative autonomy index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rai_weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyInstrument {
    pub name: String,
    pub scale: LikertScale,
    pub items: Vec<SurveyItem>,
    pub subscales: Vec<Subscale>,
}

impl SurveyInstrument {
    /// The bundled BREQ definition.
    pub fn breq() -> Self {
        Self::from_toml_str(BREQ_DEFINITION).expect("bundled BREQ definition parses")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SurveyError> {
        toml::from_str(text).map_err(|e| SurveyError::Format {
            source_name: "instrument".into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, SurveyError> {
        let text = std::fs::read_to_string(path).map_err(|e| SurveyError::io(path, e))?;
        toml::from_str(&text).map_err(|e| SurveyError::Format {
            source_name: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    pub fn item(&self, item_id: u32) -> Option<&SurveyItem> {
        self.items.iter().find(|i| i.item_id == item_id)
    }

    pub fn subscale(&self, subscale_id: &str) -> Option<&Subscale> {
        self.subscales.iter().find(|s| s.subscale_id == subscale_id)
    }
}

/// A single broken invariant of an instrument definition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    ScaleBounds { min: i32, max: i32 },
    LabelCount { expected: usize, found: usize },
    ItemPosition { position: usize, item_id: u32 },
    DuplicateItem { item_id: u32 },
    DuplicateSubscale { subscale_id: String },
    UnknownSubscale { item_id: u32, subscale_id: String },
    EmptySubscale { subscale_id: String },
    DanglingReference { subscale_id: String, item_id: u32 },
    ItemInMultipleSubscales { item_id: u32, subscales: Vec<String> },
    ItemWithoutSubscale { item_id: u32 },
    SubscaleMismatch { item_id: u32, declared: String, listed_in: String },
    ProfileItemCount { profile: String, expected: usize, found: usize },
    ProfileSubscaleSize { profile: String, subscale_id: String, expected: usize, found: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ScaleBounds { min, max } => {
                write!(f, "scale: min_rating {min} must be below max_rating {max}")
            }
            Violation::LabelCount { expected, found } => {
                write!(f, "scale: expected {expected} labels, found {found}")
            }
            Violation::ItemPosition { position, item_id } => {
                write!(f, "items[{position}]: item_id {item_id} does not match its 1-based position {}", position + 1)
            }
            Violation::DuplicateItem { item_id } => write!(f, "item {item_id}: duplicate item_id"),
            Violation::DuplicateSubscale { subscale_id } => {
                write!(f, "subscale {subscale_id}: defined more than once")
            }
            Violation::UnknownSubscale { item_id, subscale_id } => {
                write!(f, "item {item_id}: refers to unknown subscale {subscale_id}")
            }
            Violation::EmptySubscale { subscale_id } => write!(f, "subscale {subscale_id}: has no items"),
            Violation::DanglingReference { subscale_id, item_id } => {
                write!(f, "subscale {subscale_id}: references missing item {item_id}")
            }
            Violation::ItemInMultipleSubscales { item_id, subscales } => {
                write!(f, "item {item_id}: listed in several subscales ({})", subscales.join(", "))
            }
            Violation::ItemWithoutSubscale { item_id } => {
                write!(f, "item {item_id}: not listed in any subscale")
            }
            Violation::SubscaleMismatch { item_id, declared, listed_in } => write!(
                f,
                "item {item_id}: declares subscale {declared} but is listed in {listed_in}"
            ),
            Violation::ProfileItemCount { profile, expected, found } => {
                write!(f, "{profile}: expected {expected} items, found {found}")
            }
            Violation::ProfileSubscaleSize { profile, subscale_id, expected, found } => write!(
                f,
                "{profile}: subscale {subscale_id} should have {expected} items, found {found}"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

const BREQ_PROFILE: [(&str, usize); 4] =
    [("external", 4), ("introjected", 3), ("identified", 4), ("intrinsic", 4)];

/// Checks every structural invariant of `instrument`. Instruments named
/// `BREQ` are additionally held to the 15-item, 4/3/4/4 layout.
pub fn validate_instrument(instrument: &SurveyInstrument) -> ValidationReport {
    let mut violations = Vec::new();
    let scale = &instrument.scale;

    if scale.min_rating >= scale.max_rating {
        violations.push(Violation::ScaleBounds { min: scale.min_rating, max: scale.max_rating });
    } else if scale.labels.len() != scale.points() {
        violations.push(Violation::LabelCount { expected: scale.points(), found: scale.labels.len() });
    }

    let mut seen_items = BTreeSet::new();
    for (position, item) in instrument.items.iter().enumerate() {
        if !seen_items.insert(item.item_id) {
            violations.push(Violation::DuplicateItem { item_id: item.item_id });
        } else if item.item_id as usize != position + 1 {
            violations.push(Violation::ItemPosition { position, item_id: item.item_id });
        }
    }

    let mut seen_subscales = BTreeSet::new();
    for sub in &instrument.subscales {
        if !seen_subscales.insert(sub.subscale_id.as_str()) {
            violations.push(Violation::DuplicateSubscale { subscale_id: sub.subscale_id.clone() });
        }
        if sub.item_ids.is_empty() {
            violations.push(Violation::EmptySubscale { subscale_id: sub.subscale_id.clone() });
        }
        for &item_id in &sub.item_ids {
            if !seen_items.contains(&item_id) {
                violations.push(Violation::DanglingReference {
                    subscale_id: sub.subscale_id.clone(),
                    item_id,
                });
            }
        }
    }

    // item_id -> subscales that list it
    let mut membership: BTreeMap<u32, Vec<String>> = BTreeMap::new();
    for sub in &instrument.subscales {
        let unique: BTreeSet<u32> = sub.item_ids.iter().copied().collect();
        for item_id in unique {
            membership.entry(item_id).or_default().push(sub.subscale_id.clone());
        }
    }
    for (&item_id, subs) in &membership {
        if subs.len() > 1 && seen_items.contains(&item_id) {
            violations.push(Violation::ItemInMultipleSubscales { item_id, subscales: subs.clone() });
        }
    }

    for item in &instrument.items {
        if !seen_subscales.contains(item.subscale_id.as_str()) {
            violations.push(Violation::UnknownSubscale {
                item_id: item.item_id,
                subscale_id: item.subscale_id.clone(),
            });
        }
        match membership.get(&item.item_id).map(Vec::as_slice) {
            None | Some([]) => violations.push(Violation::ItemWithoutSubscale { item_id: item.item_id }),
            Some([only]) if *only != item.subscale_id && seen_subscales.contains(item.subscale_id.as_str()) => {
                violations.push(Violation::SubscaleMismatch {
                    item_id: item.item_id,
                    declared: item.subscale_id.clone(),
                    listed_in: only.clone(),
                })
            }
            _ => {}
        }
    }

    if instrument.name.eq_ignore_ascii_case("BREQ") {
        if instrument.items.len() != 15 {
            violations.push(Violation::ProfileItemCount {
                profile: "BREQ".into(),
                expected: 15,
                found: instrument.items.len(),
            });
        }
        for (id, expected) in BREQ_PROFILE {
            let found = instrument.subscale(id).map_or(0, |s| s.item_ids.len());
            if found != expected {
                violations.push(Violation::ProfileSubscaleSize {
                    profile: "BREQ".into(),
                    subscale_id: id.into(),
                    expected,
                    found,
                });
            }
        }
    }

    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_breq_is_valid() {
        let breq = SurveyInstrument::breq();
        let report = validate_instrument(&breq);
        assert!(report.is_empty(), "{report}");
        assert_eq!(breq.item_count(), 15);
        let sizes: Vec<usize> = breq.subscales.iter().map(|s| s.item_ids.len()).collect();
        assert_eq!(sizes, vec![4, 3, 4, 4]);
        assert_eq!(breq.scale.min_rating, 1);
        assert_eq!(breq.scale.max_rating, 6);
    }

    #[test]
    fn item_in_two_subscales_is_named() {
        let mut breq = SurveyInstrument::breq();
        breq.subscales[1].item_ids.push(4);
        let report = validate_instrument(&breq);
        assert!(report.violations.iter().any(|v| matches!(
            v,
            Violation::ItemInMultipleSubscales { item_id: 4, .. }
        )));
    }

    #[test]
    fn dangling_reference_reported() {
        let mut breq = SurveyInstrument::breq();
        breq.items.pop();
        let report = validate_instrument(&breq);
        assert!(report.violations.contains(&Violation::DanglingReference {
            subscale_id: "intrinsic".into(),
            item_id: 15
        }));
    }

    #[test]
    fn single_field_mutations_are_caught() {
        let mutations: Vec<fn(&mut SurveyInstrument)> = vec![
            |i| i.scale.max_rating = i.scale.min_rating,
            |i| {
                i.scale.labels.pop();
            },
            |i| i.items[3].item_id = 9,
            |i| i.items[0].subscale_id = "nope".into(),
            |i| i.items[0].subscale_id = "intrinsic".into(),
            |i| i.subscales[0].item_ids.clear(),
            |i| i.subscales[2].subscale_id = "external".into(),
            |i| {
                i.subscales[3].item_ids.pop();
            },
        ];
        for (n, mutate) in mutations.into_iter().enumerate() {
            let mut breq = SurveyInstrument::breq();
            mutate(&mut breq);
            assert!(!validate_instrument(&breq).is_empty(), "mutation {n} went unnoticed");
        }
    }

    #[test]
    fn non_breq_instrument_skips_profile() {
        let mut inst = SurveyInstrument::breq();
        inst.name = "short form".into();
        inst.items.truncate(4);
        inst.subscales.truncate(1);
        assert!(validate_instrument(&inst).is_empty());
    }
}
