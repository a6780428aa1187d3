//! The validate, tokenize, simulate and metrics commands.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::tables::{compute_report, write_report, MetricsReport};
use super::{load_findings, AppError, WorkspaceConfig};
use crate::gateway::{Clock, CredentialSource, ProviderConfig, ProviderRegistry};
use crate::metrics::CorrelationRegistry;
use crate::prompt::tokenizer::builtin_registry;
use crate::prompt::{check_template, default_template, PromptTemplate};
use crate::runner::{build_gateways, execute_run, Experiment, Finding, RunOptions, RunStore, RunSummary, RunnerError};
use crate::survey::{Roster, SurveyInstrument};

fn config_findings(cfg: &WorkspaceConfig) -> Vec<Finding> {
    let mut out = Vec::new();
    if let Err(e) = builtin_registry().resolve(&cfg.encoding) {
        out.push(Finding::new("config", e));
    }
    if let Err(e) = CorrelationRegistry::builtin().resolve(&cfg.correlation_mode) {
        out.push(Finding::new("config", e));
    }
    if cfg.workers == 0 {
        out.push(Finding::new("config", "workers must be at least 1"));
    }
    if cfg.output_dir.exists() && !cfg.output_dir.is_dir() {
        out.push(Finding::new(cfg.output_dir.display().to_string(), "output directory path is not a directory"));
    }
    out
}

fn collect<T>(result: Result<T, RunnerError>, source: &Path, findings: &mut Vec<Finding>) -> Option<T> {
    result.map_err(|e| findings.extend(load_findings(e, source))).ok()
}

/// Runs every load-time check and returns the loaded experiment when clean.
/// Problems in independent resources are all reported together.
pub fn cmd_validate(cfg: &WorkspaceConfig, registry: &ProviderRegistry) -> Result<Experiment, AppError> {
    let manifest = cfg.load_manifest()?;
    let paths = manifest.paths.clone();
    let mut findings = config_findings(cfg);

    let instrument = match &paths.instrument {
        Some(p) => collect(SurveyInstrument::load(p).map_err(RunnerError::from), p, &mut findings),
        None => Some(SurveyInstrument::breq()),
    };
    let roster = collect(Roster::load(&paths.roster).map_err(RunnerError::from), &paths.roster, &mut findings);
    let template = match &paths.template {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(src) => {
                let violations = check_template(&src);
                findings.extend(violations.iter().map(|v| Finding::new(p.display().to_string(), v)));
                if violations.is_empty() {
                    collect(PromptTemplate::parse(&src).map_err(RunnerError::from), p, &mut findings)
                } else {
                    None
                }
            }
            Err(e) => {
                findings.push(Finding::new(p.display().to_string(), e));
                None
            }
        },
        None => Some(default_template()),
    };
    let background = match std::fs::read_to_string(&paths.background) {
        Ok(text) => Some(text),
        Err(e) => {
            findings.push(Finding::new(paths.background.display().to_string(), e));
            None
        }
    };
    let providers =
        collect(ProviderConfig::load(&paths.providers).map_err(RunnerError::from), &paths.providers, &mut findings);

    let (Some(instrument), Some(roster), Some(template), Some(background), Some(providers)) =
        (instrument, roster, template, background, providers)
    else {
        return Err(AppError::Validation(findings));
    };
    let experiment = match Experiment::from_parts(manifest, instrument, roster, template, background, providers, registry) {
        Ok(exp) => exp,
        Err(e) => {
            findings.extend(load_findings(e, &cfg.manifest));
            return Err(AppError::Validation(findings));
        }
    };
    if findings.is_empty() {
        if let Err(e) = experiment.assemble_all(&cfg.encoding) {
            findings.push(Finding::new("prompt", e));
        }
    }
    if !findings.is_empty() {
        return Err(AppError::Validation(findings));
    }
    Ok(experiment)
}

/// Writes one CSV row per (respondent, variant) prompt to `out`. Returns the row count.
pub fn cmd_tokenize(cfg: &WorkspaceConfig, registry: &ProviderRegistry, out: &mut dyn Write) -> Result<usize, AppError> {
    let experiment = cmd_validate(cfg, registry)?;
    let prompts = experiment.assemble_all(&cfg.encoding)?;
    let mut writer = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| AppError::runtime(format!("stdout: {e}"));
    writer.write_record(["respondent_id", "variant", "token_count", "encoding", "backend"]).map_err(io_err)?;
    let mut rows = 0;
    for id in &experiment.respondent_ids {
        for variant in experiment.variants() {
            let p = &prompts[&(variant, id.clone())];
            writer
                .write_record([id.as_str(), variant.as_str(), &p.token_count.to_string(), &p.encoding, &p.backend])
                .map_err(io_err)?;
            rows += 1;
        }
    }
    writer.flush().map_err(|e| AppError::runtime(format!("stdout: {e}")))?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimulateOptions {
    /// Continue an existing store instead of refusing it.
    pub resume: bool,
    pub max_new_records: Option<usize>,
}

/// Executes the manifest into its store. A fatal provider error is reported
/// through `RunSummary::aborted`, after the finished records are persisted.
pub fn cmd_simulate(
    cfg: &WorkspaceConfig,
    registry: &ProviderRegistry,
    credentials: &dyn CredentialSource,
    clock: Arc<dyn Clock>,
    options: SimulateOptions,
) -> Result<RunSummary, AppError> {
    let experiment = cmd_validate(cfg, registry)?;
    let path = cfg.store_path(&experiment.manifest.manifest_id);
    if !options.resume {
        let existing = RunStore::read(&path)?;
        if !existing.is_empty() {
            return Err(AppError::Runtime(format!(
                "{} already holds {} records; pass --resume to continue it",
                path.display(),
                existing.len()
            )));
        }
    }
    let gateways = build_gateways(&experiment, registry, credentials, clock)?;
    let mut store = RunStore::open(&path)?;
    let run_options = RunOptions {
        workers: cfg.workers,
        encoding: cfg.encoding.clone(),
        max_new_records: options.max_new_records,
    };
    Ok(execute_run(&experiment, &mut store, &gateways, &run_options)?)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MetricsOptions {
    /// Report on an incomplete store, listing the gaps.
    pub partial: bool,
    pub plot_data: bool,
}

#[derive(Debug, Clone)]
pub struct MetricsOutcome {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub report: MetricsReport,
}

/// Computes all metric tables from the store and writes them under
/// `<output_dir>/metrics/<manifest_id>/`. The store is only read.
pub fn cmd_metrics(
    cfg: &WorkspaceConfig,
    registry: &ProviderRegistry,
    options: MetricsOptions,
) -> Result<MetricsOutcome, AppError> {
    let experiment = cmd_validate(cfg, registry)?;
    let path = cfg.store_path(&experiment.manifest.manifest_id);
    let store = RunStore::read(&path)?;
    if store.is_empty() {
        return Err(AppError::Runtime(format!("{}: store is empty; run simulate first", path.display())));
    }
    let keys = experiment.run_keys();
    let missing = store.missing(&keys);
    if !missing.is_empty() {
        if !options.partial {
            return Err(AppError::Partial { gaps: missing.iter().map(ToString::to_string).collect() });
        }
        log::warn!("event=partial_store missing={}", missing.len());
    }
    let mode = CorrelationRegistry::builtin().resolve(&cfg.correlation_mode)?;
    let counter = builtin_registry().resolve(&cfg.encoding).map_err(AppError::runtime)?;
    let report = compute_report(&experiment, &store, mode.as_ref(), counter.as_ref())?;
    let dir = cfg.metrics_dir(&experiment.manifest.manifest_id);
    let files = write_report(&dir, &report, options.plot_data)?;
    Ok(MetricsOutcome { dir, files, report })
}
