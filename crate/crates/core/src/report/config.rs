//! Workspace configuration: one checked-in document naming every input.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::AppError;
use crate::prompt::tokenizer::O200K_BASE;
use crate::runner::{Finding, RunManifest};

/// Environment variable holding the default config path.
pub const CONFIG_ENV: &str = "SILICON_SURVEY_CONFIG";
pub const DEFAULT_CONFIG_FILE: &str = "silicon-survey.toml";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    manifest: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    instrument: Option<PathBuf>,
    roster: Option<PathBuf>,
    template: Option<PathBuf>,
    providers: Option<PathBuf>,
    encoding: Option<String>,
    log_level: Option<String>,
    correlation_mode: Option<String>,
    workers: Option<usize>,
}

/// Resolved workspace settings. Resource paths left `None` come from the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkspaceConfig {
    pub manifest: PathBuf,
    pub output_dir: PathBuf,
    pub instrument: Option<PathBuf>,
    pub roster: Option<PathBuf>,
    pub template: Option<PathBuf>,
    pub providers: Option<PathBuf>,
    pub encoding: String,
    pub log_level: String,
    pub correlation_mode: String,
    pub workers: usize,
}

impl WorkspaceConfig {
    pub fn new(manifest: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            manifest: manifest.into(),
            output_dir: output_dir.into(),
            instrument: None,
            roster: None,
            template: None,
            providers: None,
            encoding: O200K_BASE.into(),
            log_level: "info".into(),
            correlation_mode: "flattened".into(),
            workers: 4,
        }
    }

    /// Parses a config document; relative paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, source_name: &str, base_dir: &Path) -> Result<Self, AppError> {
        let raw: ConfigFile = toml::from_str(text)
            .map_err(|e| AppError::Validation(vec![Finding::new(source_name, e.to_string())]))?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };
        let manifest = raw
            .manifest
            .map(resolve)
            .ok_or_else(|| AppError::Validation(vec![Finding::new(source_name, "missing `manifest`")]))?;
        let mut cfg = Self::new(manifest, resolve(raw.output_dir.unwrap_or_else(|| PathBuf::from("out"))));
        cfg.instrument = raw.instrument.map(resolve);
        cfg.roster = raw.roster.map(resolve);
        cfg.template = raw.template.map(resolve);
        cfg.providers = raw.providers.map(resolve);
        if let Some(e) = raw.encoding {
            cfg.encoding = e;
        }
        if let Some(l) = raw.log_level {
            cfg.log_level = l;
        }
        if let Some(m) = raw.correlation_mode {
            cfg.correlation_mode = m;
        }
        if let Some(w) = raw.workers {
            cfg.workers = w;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Validation(vec![Finding::new(path.display().to_string(), e.to_string())]))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, &path.display().to_string(), base)
    }

    /// The manifest with this config's path overrides applied.
    pub fn load_manifest(&self) -> Result<RunManifest, AppError> {
        let mut m = RunManifest::load(&self.manifest)
            .map_err(|e| AppError::Validation(super::load_findings(e, &self.manifest)))?;
        if let Some(p) = &self.instrument {
            m.paths.instrument = Some(p.clone());
        }
        if let Some(p) = &self.roster {
            m.paths.roster = p.clone();
        }
        if let Some(p) = &self.template {
            m.paths.template = Some(p.clone());
        }
        if let Some(p) = &self.providers {
            m.paths.providers = p.clone();
        }
        Ok(m)
    }

    pub fn store_path(&self, manifest_id: &str) -> PathBuf {
        crate::runner::RunStore::path_for(&self.output_dir, manifest_id)
    }

    pub fn metrics_dir(&self, manifest_id: &str) -> PathBuf {
        self.output_dir.join("metrics").join(manifest_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_and_defaults() {
        let cfg = WorkspaceConfig::from_toml_str(
            "manifest = \"data/m.toml\"\nroster = \"/abs/r.jsonl\"\nworkers = 2\n",
            "c.toml",
            Path::new("/ws"),
        )
        .unwrap();
        assert_eq!(cfg.manifest, Path::new("/ws/data/m.toml"));
        assert_eq!(cfg.output_dir, Path::new("/ws/out"));
        assert_eq!(cfg.roster.as_deref(), Some(Path::new("/abs/r.jsonl")));
        assert_eq!((cfg.encoding.as_str(), cfg.workers), ("o200k_base", 2));
        assert_eq!(cfg.store_path("m1"), Path::new("/ws/out/runs/m1.jsonl"));
    }

    #[test]
    fn missing_manifest_and_unknown_keys() {
        assert!(matches!(WorkspaceConfig::from_toml_str("", "c", Path::new(".")), Err(AppError::Validation(_))));
        assert!(WorkspaceConfig::from_toml_str("manifest='m'\nbogus=1", "c", Path::new(".")).is_err());
    }
}
