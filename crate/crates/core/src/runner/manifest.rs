//! Run manifests: what to simulate, with which resources.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{Condition, RunKey, RunnerError, Temperature};
use crate::prompt::VariantId;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DesignSection {
    chatbots: Vec<String>,
    variants: Vec<VariantId>,
    temperatures: Vec<Temperature>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    manifest_id: String,
    #[serde(default)]
    master_seed: u64,
    #[serde(default = "one")]
    repeats_per_cell: u32,
    #[serde(default)]
    instrument: Option<PathBuf>,
    roster: PathBuf,
    #[serde(default)]
    template: Option<PathBuf>,
    background: PathBuf,
    providers: PathBuf,
    #[serde(default)]
    respondent_ids: Option<Vec<String>>,
    #[serde(default)]
    design: Option<DesignSection>,
    #[serde(default)]
    conditions: Option<Vec<Condition>>,
}

fn one() -> u32 {
    1
}

/// Where the manifest's resources live. `None` means the bundled default.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestPaths {
    pub instrument: Option<PathBuf>,
    pub roster: PathBuf,
    pub template: Option<PathBuf>,
    pub background: PathBuf,
    pub providers: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub manifest_id: String,
    pub master_seed: u64,
    pub repeats_per_cell: u32,
    /// Empty means every respondent in the roster.
    pub respondent_ids: Vec<String>,
    pub conditions: Vec<Condition>,
    pub paths: ManifestPaths,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ManifestViolation {
    BadId(String),
    NoConditions,
    ZeroRepeats,
    BothDesignAndConditions,
    DuplicateCondition(String),
    DuplicateRespondent(String),
    UnknownRespondent(String),
    UnknownChatbot(String),
    EmptyDesignList(&'static str),
}

impl fmt::Display for ManifestViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifestViolation::BadId(id) => {
                write!(f, "manifest_id {id:?} must be non-empty and use only letters, digits, '-', '_' or '.'")
            }
            ManifestViolation::NoConditions => f.write_str("no conditions: give a [design] section or [[conditions]]"),
            ManifestViolation::ZeroRepeats => f.write_str("repeats_per_cell must be at least 1"),
            ManifestViolation::BothDesignAndConditions => f.write_str("give either [design] or [[conditions]], not both"),
            ManifestViolation::DuplicateCondition(c) => {
                write!(f, "condition {c} listed more than once (duplicate run keys)")
            }
            ManifestViolation::DuplicateRespondent(r) => write!(f, "respondent {r} listed more than once"),
            ManifestViolation::UnknownRespondent(r) => write!(f, "respondent {r} is not in the roster"),
            ManifestViolation::UnknownChatbot(c) => write!(f, "chatbot {c} has no provider entry"),
            ManifestViolation::EmptyDesignList(which) => write!(f, "design.{which} is empty"),
        }
    }
}

impl RunManifest {
    /// Parses a manifest; relative paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, source_name: &str, base_dir: &Path) -> Result<Self, RunnerError> {
        let raw: ManifestFile =
            toml::from_str(text).map_err(|e| RunnerError::Format { source_name: source_name.into(), message: e.to_string() })?;
        let mut violations = Vec::new();
        let conditions = match (&raw.design, &raw.conditions) {
            (Some(_), Some(_)) => {
                violations.push(ManifestViolation::BothDesignAndConditions);
                Vec::new()
            }
            (Some(d), None) => {
                for (name, empty) in [
                    ("chatbots", d.chatbots.is_empty()),
                    ("variants", d.variants.is_empty()),
                    ("temperatures", d.temperatures.is_empty()),
                ] {
                    if empty {
                        violations.push(ManifestViolation::EmptyDesignList(name));
                    }
                }
                cross_product(&d.chatbots, &d.variants, &d.temperatures)
            }
            (None, Some(list)) => canonical_order(list.clone()),
            (None, None) => Vec::new(),
        };
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
        let manifest = RunManifest {
            manifest_id: raw.manifest_id,
            master_seed: raw.master_seed,
            repeats_per_cell: raw.repeats_per_cell,
            respondent_ids: raw.respondent_ids.unwrap_or_default(),
            conditions,
            paths: ManifestPaths {
                instrument: raw.instrument.as_deref().map(resolve),
                roster: resolve(&raw.roster),
                template: raw.template.as_deref().map(resolve),
                background: resolve(&raw.background),
                providers: resolve(&raw.providers),
            },
        };
        violations.extend(manifest.validate());
        if violations.is_empty() {
            Ok(manifest)
        } else {
            Err(RunnerError::Manifest { source_name: source_name.into(), violations })
        }
    }

    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, &path.display().to_string(), base)
    }

    /// Structural checks that need no other resource.
    pub fn validate(&self) -> Vec<ManifestViolation> {
        let mut out = Vec::new();
        let id_ok = !self.manifest_id.is_empty()
            && self.manifest_id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            && !self.manifest_id.starts_with('.');
        if !id_ok {
            out.push(ManifestViolation::BadId(self.manifest_id.clone()));
        }
        if self.conditions.is_empty() {
            out.push(ManifestViolation::NoConditions);
        }
        if self.repeats_per_cell == 0 {
            out.push(ManifestViolation::ZeroRepeats);
        }
        let mut seen = BTreeSet::new();
        for c in &self.conditions {
            if !seen.insert(c) {
                out.push(ManifestViolation::DuplicateCondition(c.to_string()));
            }
        }
        let mut ids = BTreeSet::new();
        for r in &self.respondent_ids {
            if !ids.insert(r) {
                out.push(ManifestViolation::DuplicateRespondent(r.clone()));
            }
        }
        out
    }

    /// Distinct chatbot names in condition order.
    pub fn chatbots(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in &self.conditions {
            if !out.contains(&c.chatbot.as_str()) {
                out.push(&c.chatbot);
            }
        }
        out
    }

    /// Every run key, in canonical order: condition, then respondent, then repeat.
    pub fn run_keys(&self, respondent_ids: &[String]) -> Vec<RunKey> {
        let mut keys = Vec::with_capacity(self.conditions.len() * respondent_ids.len() * self.repeats_per_cell as usize);
        for c in enumerate_conditions(self) {
            for r in respondent_ids {
                for k in 0..self.repeats_per_cell {
                    keys.push(RunKey { condition: c.clone(), respondent_id: r.clone(), repeat_index: k });
                }
            }
        }
        keys
    }
}

fn cross_product(chatbots: &[String], variants: &[VariantId], temperatures: &[Temperature]) -> Vec<Condition> {
    let mut temps = temperatures.to_vec();
    temps.sort();
    let mut out = Vec::with_capacity(chatbots.len() * variants.len() * temps.len());
    for c in chatbots {
        for &v in variants {
            for &t in &temps {
                out.push(Condition::new(c.clone(), v, t));
            }
        }
    }
    out
}

/// Chatbots in first-appearance order, then variant order, then ascending temperature.
fn canonical_order(mut list: Vec<Condition>) -> Vec<Condition> {
    let mut rank: HashMap<String, usize> = HashMap::new();
    for c in &list {
        let next = rank.len();
        rank.entry(c.chatbot.clone()).or_insert(next);
    }
    list.sort_by(|a, b| {
        (rank[&a.chatbot], a.prompt_variant, a.temperature).cmp(&(rank[&b.chatbot], b.prompt_variant, b.temperature))
    });
    list
}

/// The manifest's conditions in canonical order.
pub fn enumerate_conditions(manifest: &RunManifest) -> Vec<Condition> {
    manifest.conditions.clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD: &str = r#"
manifest_id = "m1"
master_seed = 7
roster = "roster.jsonl"
background = "bg.txt"
providers = "providers.toml"
"#;

    fn parse(body: &str) -> Result<RunManifest, RunnerError> {
        RunManifest::from_toml_str(&format!("{HEAD}{body}"), "m.toml", Path::new("/base"))
    }

    fn violations(body: &str) -> Vec<ManifestViolation> {
        match parse(body) {
            Err(RunnerError::Manifest { violations, .. }) => violations,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn paper_design_has_24_conditions() {
        let m = parse(
            r#"
[design]
chatbots = ["gpt", "claude", "gemini"]
variants = ["P_BR", "P_BR_PI", "P_BR_DI", "P_BR_PI_DI"]
temperatures = [0.5, 0.0]
"#,
        )
        .unwrap();
        let c = enumerate_conditions(&m);
        assert_eq!(c.len(), 24);
        assert_eq!(c[0].to_string(), "gpt/P_BR/0");
        assert_eq!(c[1].to_string(), "gpt/P_BR/0.5");
        assert_eq!(c[23].to_string(), "gemini/P_BR_PI_DI/0.5");
        assert_eq!(m.paths.roster, Path::new("/base/roster.jsonl"));
        assert!(m.paths.instrument.is_none());
        assert_eq!(m.chatbots(), ["gpt", "claude", "gemini"]);
    }

    #[test]
    fn explicit_conditions_are_ordered() {
        let m = parse(
            r#"
[[conditions]]
chatbot = "b"
variant = "P_BR_DI"
temperature = 0.5

[[conditions]]
chatbot = "a"
variant = "P_BR"
temperature = 0.0

[[conditions]]
chatbot = "b"
variant = "P_BR"
temperature = 0.5
"#,
        )
        .unwrap();
        let names: Vec<String> = enumerate_conditions(&m).iter().map(ToString::to_string).collect();
        assert_eq!(names, ["b/P_BR/0.5", "b/P_BR_DI/0.5", "a/P_BR/0"]);
    }

    #[test]
    fn duplicate_triple_is_rejected() {
        let v = violations(
            r#"
[design]
chatbots = ["gpt", "gpt"]
variants = ["P_BR"]
temperatures = [0.0]
"#,
        );
        assert_eq!(v, [ManifestViolation::DuplicateCondition("gpt/P_BR/0".into())]);
        let v = violations(
            r#"
respondent_ids = ["a", "a"]
[design]
chatbots = ["gpt"]
variants = ["P_BR"]
temperatures = [0.0]
"#,
        );
        assert_eq!(v, [ManifestViolation::DuplicateRespondent("a".into())]);
    }

    #[test]
    fn structural_violations() {
        assert_eq!(violations(""), [ManifestViolation::NoConditions]);
        let v = violations("repeats_per_cell = 0\n[design]\nchatbots=[]\nvariants=['P_BR']\ntemperatures=[0.0]\n");
        assert!(v.contains(&ManifestViolation::EmptyDesignList("chatbots")));
        assert!(v.contains(&ManifestViolation::ZeroRepeats));
        assert!(matches!(parse("bogus = 1\n"), Err(RunnerError::Format { .. })));
    }

    #[test]
    fn run_keys_cover_the_cross_product() {
        let m = parse("repeats_per_cell = 2\n[design]\nchatbots=['a','b']\nvariants=['P_BR','P_BR_PI']\ntemperatures=[0.0, 0.5]\n")
            .unwrap();
        let ids = vec!["x".to_string(), "y".to_string(), "z".to_string()];
        let keys = m.run_keys(&ids);
        assert_eq!(keys.len(), 8 * 3 * 2);
        assert_eq!(keys.iter().collect::<BTreeSet<_>>().len(), keys.len());
    }
}
