//! Loading an experiment and executing its run keys against providers.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};

use serde::Serialize;

use super::{Finding, ManifestViolation, RunKey, RunManifest, RunRecord, RunStatus, RunStore, RunnerError};
use crate::gateway::{
    parse_ratings, Clock, CompletionRequest, CredentialSource, Gateway, GatewayError, ProviderConfig,
    ProviderRegistry, RequestContext,
};
use crate::prompt::format::corrective_instruction;
use crate::prompt::tokenizer::{builtin_registry, O200K_BASE};
use crate::prompt::{assemble_prompt, check_template, default_template, PromptError, PromptTemplate, RenderedPrompt, VariantId};
use crate::seed::stable_hash;
use crate::survey::{validate_instrument, validate_roster, Roster, SurveyInstrument};

/// A manifest with every resource it references loaded and validated.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub manifest: RunManifest,
    pub instrument: SurveyInstrument,
    pub roster: Roster,
    pub template: PromptTemplate,
    pub background: String,
    pub providers: ProviderConfig,
    /// Manifest respondents, or the whole roster when the manifest lists none.
    pub respondent_ids: Vec<String>,
}

fn read_text(path: &Path) -> Result<String, RunnerError> {
    std::fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))
}

impl Experiment {
    /// Loads the manifest and its resources; any violation aborts with the full list.
    pub fn load(manifest_path: &Path) -> Result<Self, RunnerError> {
        Self::from_manifest(RunManifest::load(manifest_path)?)
    }

    /// Loads the resources `manifest` points at.
    pub fn from_manifest(manifest: RunManifest) -> Result<Self, RunnerError> {
        let paths = manifest.paths.clone();
        let instrument = match &paths.instrument {
            Some(p) => SurveyInstrument::load(p)?,
            None => SurveyInstrument::breq(),
        };
        let roster = Roster::load(&paths.roster)?;
        let template = match &paths.template {
            Some(p) => {
                let src = read_text(p)?;
                let violations = check_template(&src);
                if !violations.is_empty() {
                    return Err(RunnerError::Invalid(
                        violations.iter().map(|v| Finding::new(p.display().to_string(), v.to_string())).collect(),
                    ));
                }
                PromptTemplate::parse(&src)?
            }
            None => default_template(),
        };
        let background = read_text(&paths.background)?;
        let providers = ProviderConfig::load(&paths.providers)?;
        Self::from_parts(manifest, instrument, roster, template, background, providers, &ProviderRegistry::builtin())
    }

    pub fn from_parts(
        manifest: RunManifest,
        instrument: SurveyInstrument,
        roster: Roster,
        template: PromptTemplate,
        background: String,
        providers: ProviderConfig,
        registry: &ProviderRegistry,
    ) -> Result<Self, RunnerError> {
        let paths = &manifest.paths;
        let instrument_src =
            paths.instrument.as_ref().map_or_else(|| "bundled BREQ".to_string(), |p| p.display().to_string());
        let roster_src = paths.roster.display().to_string();
        let providers_src = paths.providers.display().to_string();
        let manifest_src = format!("manifest {}", manifest.manifest_id);

        let mut findings: Vec<Finding> = Vec::new();
        findings.extend(validate_instrument(&instrument).violations.iter().map(|v| Finding::new(&instrument_src, v)));
        findings.extend(validate_roster(&roster, &instrument).iter().map(|v| Finding::new(&roster_src, v)));
        findings.extend(providers.validate(registry).iter().map(|v| Finding::new(&providers_src, v)));
        findings.extend(manifest.validate().iter().map(|v| Finding::new(&manifest_src, v)));
        if background.trim().is_empty() {
            findings.push(Finding::new(paths.background.display().to_string(), "research background is empty"));
        }
        for chatbot in manifest.chatbots() {
            if providers.get(chatbot).is_none() {
                findings.push(Finding::new(&manifest_src, ManifestViolation::UnknownChatbot(chatbot.into())));
            }
        }
        let respondent_ids: Vec<String> = if manifest.respondent_ids.is_empty() {
            roster.ids().map(str::to_string).collect()
        } else {
            for r in &manifest.respondent_ids {
                if roster.get(r).is_none() {
                    findings.push(Finding::new(&manifest_src, ManifestViolation::UnknownRespondent(r.clone())));
                }
            }
            manifest.respondent_ids.clone()
        };
        if respondent_ids.is_empty() {
            findings.push(Finding::new(&roster_src, "no respondents"));
        }
        if !findings.is_empty() {
            return Err(RunnerError::Invalid(findings));
        }
        Ok(Self { manifest, instrument, roster, template, background, providers, respondent_ids })
    }

    pub fn run_keys(&self) -> Vec<RunKey> {
        self.manifest.run_keys(&self.respondent_ids)
    }

    /// Variants the manifest uses, in order.
    pub fn variants(&self) -> Vec<VariantId> {
        let mut v: Vec<VariantId> = self.manifest.conditions.iter().map(|c| c.prompt_variant).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Renders every (variant, respondent) prompt the manifest needs.
    pub fn assemble_all(&self, encoding: &str) -> Result<BTreeMap<(VariantId, String), RenderedPrompt>, PromptError> {
        let counter = builtin_registry().resolve(encoding)?;
        let mut out = BTreeMap::new();
        for v in self.variants() {
            for id in &self.respondent_ids {
                let respondent = self.roster.get(id).expect("respondent ids validated against roster");
                let p = assemble_prompt(v, respondent, &self.background, &self.instrument, &self.template, counter.as_ref())?;
                out.insert((v, id.clone()), p);
            }
        }
        Ok(out)
    }
}

/// Gateways by chatbot name.
pub type Gateways = BTreeMap<String, Arc<Gateway>>;

/// Builds a gateway for every chatbot in the manifest. Fails on the first
/// missing credential, before any request is made.
pub fn build_gateways(
    experiment: &Experiment,
    registry: &ProviderRegistry,
    credentials: &dyn CredentialSource,
    clock: Arc<dyn Clock>,
) -> Result<Gateways, RunnerError> {
    let mut out = Gateways::new();
    for name in experiment.manifest.chatbots() {
        let spec = experiment
            .providers
            .get(name)
            .ok_or_else(|| RunnerError::MissingProvider(name.to_string()))?;
        out.insert(name.to_string(), Arc::new(Gateway::from_registry(spec, registry, credentials, clock.clone())?));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub workers: usize,
    pub encoding: String,
    /// Stop after this many new records; used to cut a batch short.
    pub max_new_records: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { workers: 4, encoding: O200K_BASE.into(), max_new_records: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub total_keys: usize,
    pub already_terminal: usize,
    pub new_records: usize,
    pub ok: usize,
    pub parse_failed: usize,
    pub transport_failed: usize,
    pub provider_calls: u64,
    /// Set when a fatal provider error stopped the batch.
    pub aborted: Option<String>,
}

impl RunSummary {
    fn count(&mut self, record: &RunRecord) {
        self.new_records += 1;
        self.provider_calls += u64::from(record.provider_calls);
        match record.status {
            RunStatus::Ok => self.ok += 1,
            RunStatus::ParseFailed => self.parse_failed += 1,
            RunStatus::TransportFailed => self.transport_failed += 1,
        }
    }
}

/// Seed for one run key; independent of enumeration order.
pub fn key_seed(master_seed: u64, key: &RunKey) -> u64 {
    stable_hash(&[
        b"run-key",
        &master_seed.to_le_bytes(),
        key.condition.chatbot.as_bytes(),
        key.condition.prompt_variant.as_str().as_bytes(),
        &key.condition.temperature.value().to_bits().to_le_bytes(),
        key.respondent_id.as_bytes(),
        &key.repeat_index.to_le_bytes(),
    ])
}

fn run_one(
    experiment: &Experiment,
    gateway: &Gateway,
    prompt: &RenderedPrompt,
    key: &RunKey,
) -> Result<RunRecord, GatewayError> {
    let spec = gateway.spec();
    let scale = &experiment.instrument.scale;
    let seed = key_seed(experiment.manifest.master_seed, key);
    let context = RequestContext {
        master_seed: experiment.manifest.master_seed,
        respondent_key: key.respondent_id.clone(),
        condition_key: key.condition.cell_key(),
        repeat_index: key.repeat_index,
        item_count: experiment.instrument.item_count(),
        scale_min: scale.min_rating,
        scale_max: scale.max_rating,
    };
    let mut record = RunRecord {
        key: key.clone(),
        status: RunStatus::TransportFailed,
        seed,
        prompt_digest: prompt.digest(),
        token_count: prompt.token_count,
        encoding: prompt.encoding.clone(),
        tokenizer_backend: prompt.backend.clone(),
        raw_text: String::new(),
        parsed: None,
        reasks: 0,
        provider_calls: 0,
        prompt_tokens: 0,
        output_tokens: 0,
        latency_ms: 0,
        provider_metadata: BTreeMap::new(),
        error: None,
    };
    let mut prompt_text = prompt.full_text.clone();
    loop {
        let request = CompletionRequest {
            prompt_text,
            temperature: key.condition.temperature.value(),
            max_output_tokens: spec.max_output_tokens,
            seed: Some(seed),
            context: Some(context.clone()),
        };
        match gateway.complete(&request) {
            Ok(result) => {
                record.provider_calls += result.attempt_count;
                record.prompt_tokens += result.prompt_tokens;
                record.output_tokens += result.output_tokens;
                record.latency_ms += result.latency_ms;
                record.provider_metadata = result.provider_metadata;
                let parsed = parse_ratings(&result.raw_text, &experiment.instrument);
                record.raw_text = result.raw_text;
                match parsed.failure() {
                    None => {
                        record.status = RunStatus::Ok;
                        record.error = None;
                        record.parsed = Some(parsed);
                        return Ok(record);
                    }
                    Some(f) if record.reasks < spec.max_retries => {
                        log::debug!("key={key} event=reask kind={:?} detail=\"{}\"", f.failure_kind, f.detail);
                        record.reasks += 1;
                        prompt_text = format!(
                            "{}{}",
                            prompt.full_text,
                            corrective_instruction(&experiment.instrument, &f.detail)
                        );
                    }
                    Some(f) => {
                        record.status = RunStatus::ParseFailed;
                        record.error = Some(f.detail.clone());
                        record.parsed = Some(parsed);
                        return Ok(record);
                    }
                }
            }
            Err(e) if e.is_fatal() => return Err(e),
            Err(e) => {
                record.provider_calls += e.attempts();
                record.status = RunStatus::TransportFailed;
                record.parsed = None;
                record.error = Some(e.to_string());
                return Ok(record);
            }
        }
    }
}

/// Executes every key of `experiment` that is not yet terminal in `store`.
///
/// All prompts are assembled first, so assembly problems abort before any
/// provider call. Records are appended in canonical key order regardless of
/// which worker finishes first.
pub fn execute_run(
    experiment: &Experiment,
    store: &mut RunStore,
    gateways: &Gateways,
    options: &RunOptions,
) -> Result<RunSummary, RunnerError> {
    for name in experiment.manifest.chatbots() {
        if !gateways.contains_key(name) {
            return Err(RunnerError::MissingProvider(name.to_string()));
        }
    }
    let prompts = experiment.assemble_all(&options.encoding)?;
    let keys = experiment.run_keys();
    let mut summary = RunSummary { total_keys: keys.len(), ..Default::default() };
    let mut pending: Vec<&RunKey> = keys.iter().filter(|k| !store.is_terminal(k)).collect();
    summary.already_terminal = keys.len() - pending.len();
    if let Some(limit) = options.max_new_records {
        pending.truncate(limit);
    }
    if pending.is_empty() {
        return Ok(summary);
    }

    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let workers = options.workers.clamp(1, pending.len());
    let (tx, rx) = mpsc::channel::<(usize, Result<RunRecord, GatewayError>)>();
    let mut write_error = None;

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, abort, pending, prompts) = (&next, &abort, &pending, &prompts);
            scope.spawn(move || loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(key) = pending.get(i) else { break };
                let gateway = &gateways[&key.condition.chatbot];
                let prompt = &prompts[&(key.condition.prompt_variant, key.respondent_id.clone())];
                let outcome = run_one(experiment, gateway, prompt, key);
                if outcome.is_err() {
                    abort.store(true, Ordering::SeqCst);
                }
                if tx.send((i, outcome)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut buffer: BTreeMap<usize, Option<RunRecord>> = BTreeMap::new();
        let mut next_write = 0usize;
        for (i, outcome) in rx {
            match outcome {
                Ok(record) => {
                    buffer.insert(i, Some(record));
                }
                Err(e) => {
                    log::error!("key={} event=abort error=\"{e}\"", pending[i]);
                    summary.aborted.get_or_insert_with(|| e.to_string());
                    buffer.insert(i, None);
                }
            }
            while let Some(entry) = buffer.remove(&next_write) {
                if let Some(record) = entry {
                    write_one(store, record, &mut summary, &mut write_error);
                }
                next_write += 1;
            }
        }
        // after an abort, keep what finished even though it leaves gaps
        for record in std::mem::take(&mut buffer).into_values().flatten() {
            write_one(store, record, &mut summary, &mut write_error);
        }
    });

    if let Some(e) = write_error {
        return Err(e);
    }
    log::info!(
        "event=run_done total={} already_terminal={} new={} ok={} parse_failed={} transport_failed={} calls={}",
        summary.total_keys,
        summary.already_terminal,
        summary.new_records,
        summary.ok,
        summary.parse_failed,
        summary.transport_failed,
        summary.provider_calls
    );
    Ok(summary)
}

fn write_one(store: &mut RunStore, record: RunRecord, summary: &mut RunSummary, error: &mut Option<RunnerError>) {
    if error.is_some() {
        return;
    }
    log::debug!("key={} status={} calls={}", record.key, record.status.as_str(), record.provider_calls);
    if store.is_terminal(&record.key) {
        return;
    }
    summary.count(&record);
    if let Err(e) = store.append(record) {
        *error = Some(e);
    }
}
