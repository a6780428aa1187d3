//! Metric tables computed from a run store, and their CSV/JSON serialization.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde_json::json;

use super::AppError;
use crate::metrics::{
    anova3_main_effects, design_cells, human_correlations, interview_length_association, item_rmse, item_stats,
    llm_pair_correlations, person_rmse, test_rmse, AnovaTable, Association, CorrelationMode, HumanCorrelation,
    ItemStats, MatrixSet, PairCorrelation, PairObservation,
};
use crate::prompt::tokenizer::TokenCounter;
use crate::runner::{collect_matrix, Condition, Exclusion, Experiment, RunStore, RunnerError};
use crate::survey::ResponseMatrix;

/// Literal written for undefined values.
pub const NA: &str = "NA";

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub condition: Condition,
    /// Respondents with at least one ok record.
    pub effective_n: usize,
    pub exclusions: Vec<Exclusion>,
    /// Empty when the condition has no usable data.
    pub item_stats: Vec<ItemStats>,
    pub item_rmse: Vec<(u32, f64)>,
    pub person_rmse: IndexMap<String, f64>,
    pub test_rmse: Option<f64>,
    /// Respondents shared with the human matrix.
    pub rmse_n: usize,
}

impl ConditionReport {
    pub fn has_data(&self) -> bool {
        self.effective_n > 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub manifest_id: String,
    pub correlation_mode: String,
    /// Distinct (encoding, tokenizer backend) pairs recorded in the store.
    pub tokenizers: Vec<(String, String)>,
    pub chatbots: Vec<String>,
    /// One per manifest condition, in manifest order.
    pub conditions: Vec<ConditionReport>,
    pub human_stats: Vec<ItemStats>,
    pub pairs: Vec<PairCorrelation>,
    pub pair_gaps: Vec<String>,
    pub human_correlations: Vec<HumanCorrelation>,
    pub anova: Option<AnovaTable>,
    pub anova_note: Option<String>,
    pub interview_tokens: BTreeMap<String, usize>,
    pub interview_length: Association,
    pub missing_keys: Vec<String>,
}

fn pair_observations(pairs: &[PairCorrelation]) -> Result<Vec<PairObservation>, String> {
    pairs
        .iter()
        .map(|p| {
            let rho = p.rho.ok_or_else(|| {
                format!("correlation {} at {}/{} is undefined", p.label(), p.variant, p.temperature)
            })?;
            Ok(PairObservation {
                pair_label: p.label(),
                variant: p.variant.to_string(),
                temperature: p.temperature.to_string(),
                rho,
            })
        })
        .collect()
}

/// Computes every metric table for `experiment` from the records in `store`.
/// Conditions without usable data are reported but skipped by the metrics.
pub fn compute_report(
    experiment: &Experiment,
    store: &RunStore,
    mode: &dyn CorrelationMode,
    counter: &dyn TokenCounter,
) -> Result<MetricsReport, AppError> {
    let ids = &experiment.respondent_ids;
    let id_set: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
    let human = ResponseMatrix::human(&experiment.roster, &experiment.instrument)
        .map_err(AppError::runtime)?
        .restricted_to(&id_set);
    if human.is_empty() {
        return Err(AppError::Runtime("no manifest respondent has observed ratings in the roster".into()));
    }
    let human_ids = human.id_set();

    let mut matrices = MatrixSet::new();
    let mut conditions = Vec::new();
    for condition in &experiment.manifest.conditions {
        let collected = match collect_matrix(store, condition, &experiment.instrument, ids) {
            Ok(c) => c,
            Err(RunnerError::EmptyMatrix { exclusions, .. }) => {
                log::warn!("condition={condition} event=excluded reason=no_ok_records");
                conditions.push(ConditionReport {
                    condition: condition.clone(),
                    effective_n: 0,
                    exclusions,
                    item_stats: Vec::new(),
                    item_rmse: Vec::new(),
                    person_rmse: IndexMap::new(),
                    test_rmse: None,
                    rmse_n: 0,
                });
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let matrix = collected.matrix;
        let common: BTreeSet<&str> = matrix.id_set().intersection(&human_ids).copied().collect();
        let mut report = ConditionReport {
            condition: condition.clone(),
            effective_n: matrix.n_respondents(),
            exclusions: collected.exclusions,
            item_stats: item_stats(&matrix)?,
            item_rmse: Vec::new(),
            person_rmse: IndexMap::new(),
            test_rmse: None,
            rmse_n: common.len(),
        };
        if !common.is_empty() {
            let (ai, h) = (matrix.restricted_to(&common), human.restricted_to(&common));
            report.item_rmse = item_rmse(&ai, &h)?;
            report.person_rmse = person_rmse(&ai, &h)?;
            report.test_rmse = Some(test_rmse(&ai, &h, &experiment.instrument)?);
        }
        matrices.insert(condition.clone(), matrix);
        conditions.push(report);
    }

    let chatbots: Vec<String> = experiment.manifest.chatbots().into_iter().map(str::to_string).collect();
    let cells = design_cells(&experiment.manifest.conditions);
    let (pairs, pair_gaps) = llm_pair_correlations(&matrices, &chatbots, &cells, mode)?;
    let human_corr = human_correlations(&matrices, &human, &experiment.manifest.conditions, mode)?;

    let (anova, anova_note) = if chatbots.len() < 2 {
        (None, Some("fewer than two chatbots: no pair correlations".to_string()))
    } else {
        match pair_observations(&pairs).and_then(|obs| anova3_main_effects(&obs).map_err(|e| e.to_string())) {
            Ok(t) => {
                let note = t.residual().ms.eq(&0.0).then(|| "residual mean square is zero: F undefined".to_string());
                (Some(t), note)
            }
            Err(note) => (None, Some(note)),
        }
    };

    let interview_tokens: BTreeMap<String, usize> = ids
        .iter()
        .filter_map(|id| experiment.roster.get(id))
        .filter(|r| !r.interview_transcript.trim().is_empty())
        .map(|r| (r.respondent_id.clone(), counter.count(&r.interview_transcript)))
        .collect();
    let interview_person: Vec<&IndexMap<String, f64>> = conditions
        .iter()
        .filter(|c| c.condition.prompt_variant.has_interview() && !c.person_rmse.is_empty())
        .map(|c| &c.person_rmse)
        .collect();
    let interview_length = interview_length_association(&interview_tokens, &interview_person);

    let tokenizers: BTreeSet<(String, String)> =
        store.records().iter().map(|r| (r.encoding.clone(), r.tokenizer_backend.clone())).collect();
    let keys = experiment.run_keys();
    let missing_keys = store.missing(&keys).into_iter().map(ToString::to_string).collect();

    Ok(MetricsReport {
        manifest_id: experiment.manifest.manifest_id.clone(),
        correlation_mode: mode.name().to_string(),
        tokenizers: tokenizers.into_iter().collect(),
        chatbots,
        conditions,
        human_stats: item_stats(&human)?,
        pairs,
        pair_gaps,
        human_correlations: human_corr,
        anova,
        anova_note,
        interview_tokens,
        interview_length,
        missing_keys,
    })
}

fn fmt_f(v: f64) -> String {
    v.to_string()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), fmt_f)
}

fn cond_cols(c: &Condition) -> [String; 3] {
    [c.chatbot.clone(), c.prompt_variant.to_string(), c.temperature.to_string()]
}

struct Csv {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl Csv {
    fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self, AppError> {
        let path = dir.join(name);
        let mut writer = csv::Writer::from_path(&path).map_err(|e| AppError::runtime(format!("{}: {e}", path.display())))?;
        writer.write_record(header).map_err(|e| AppError::runtime(format!("{}: {e}", path.display())))?;
        Ok(Self { path, writer })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<(), AppError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| AppError::runtime(format!("{}: {e}", self.path.display())))
    }

    fn finish(mut self) -> Result<PathBuf, AppError> {
        self.writer.flush().map_err(|e| AppError::runtime(format!("{}: {e}", self.path.display())))?;
        Ok(self.path)
    }
}

fn stats_rows(
    csv: &mut Csv,
    report: &MetricsReport,
    value: impl Fn(&ItemStats) -> Vec<String>,
) -> Result<(), AppError> {
    for c in report.conditions.iter().filter(|c| c.has_data()) {
        for s in &c.item_stats {
            let mut row = cond_cols(&c.condition).to_vec();
            row.push(s.item_id.to_string());
            row.extend(value(s));
            csv.row(row)?;
        }
    }
    for s in &report.human_stats {
        let mut row = vec!["human".to_string(), NA.into(), NA.into(), s.item_id.to_string()];
        row.extend(value(s));
        csv.row(row)?;
    }
    Ok(())
}

fn write_item_stats(dir: &Path, report: &MetricsReport) -> Result<PathBuf, AppError> {
    let mut csv = Csv::create(dir, "item_stats.csv", &["chatbot", "variant", "temperature", "item_id", "mean", "variance", "n"])?;
    stats_rows(&mut csv, report, |s| vec![fmt_f(s.mean), fmt_opt(s.variance), s.n.to_string()])?;
    csv.finish()
}

fn write_rmse(dir: &Path, report: &MetricsReport) -> Result<Vec<PathBuf>, AppError> {
    let with_rmse = || report.conditions.iter().filter(|c| c.test_rmse.is_some());
    let mut item = Csv::create(dir, "rmse_item.csv", &["chatbot", "variant", "temperature", "item_id", "rmse", "n"])?;
    let mut person = Csv::create(dir, "rmse_person.csv", &["chatbot", "variant", "temperature", "respondent_id", "rmse"])?;
    let mut test = Csv::create(dir, "rmse_test.csv", &["chatbot", "variant", "temperature", "rmse", "n"])?;
    for c in with_rmse() {
        let cols = cond_cols(&c.condition);
        for (item_id, v) in &c.item_rmse {
            item.row(cols.iter().cloned().chain([item_id.to_string(), fmt_f(*v), c.rmse_n.to_string()]))?;
        }
        for (id, v) in &c.person_rmse {
            person.row(cols.iter().cloned().chain([id.clone(), fmt_f(*v)]))?;
        }
        test.row(cols.iter().cloned().chain([fmt_opt(c.test_rmse), c.rmse_n.to_string()]))?;
    }
    Ok(vec![item.finish()?, person.finish()?, test.finish()?])
}

/// Wide layout: one row per (temperature, variant) cell, one column per chatbot pair.
fn write_pairs(dir: &Path, report: &MetricsReport) -> Result<PathBuf, AppError> {
    let mut labels: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(crate::runner::Temperature, crate::prompt::VariantId), BTreeMap<String, Option<f64>>> =
        BTreeMap::new();
    for p in &report.pairs {
        if !labels.contains(&p.label()) {
            labels.push(p.label());
        }
        cells.entry((p.temperature, p.variant)).or_default().insert(p.label(), p.rho);
    }
    let mut header = vec!["temperature".to_string(), "variant".to_string()];
    header.extend(labels.iter().map(|l| format!("rho_{}", l.replace('-', "_"))));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::create(dir, "correlations_pairs.csv", &header_refs)?;
    for ((temp, variant), rhos) in &cells {
        let mut row = vec![temp.to_string(), variant.to_string()];
        row.extend(labels.iter().map(|l| fmt_opt(rhos.get(l).copied().flatten())));
        csv.row(row)?;
    }
    csv.finish()
}

fn human_corr_rows(report: &MetricsReport) -> impl Iterator<Item = [String; 5]> + '_ {
    report.human_correlations.iter().map(|h| {
        [
            h.chatbot.clone(),
            h.variant.to_string(),
            h.temperature.map_or_else(|| "mean".to_string(), |t| t.to_string()),
            fmt_opt(h.rho),
            h.n_points.to_string(),
        ]
    })
}

fn write_human_corr(dir: &Path, report: &MetricsReport) -> Result<PathBuf, AppError> {
    let mut csv = Csv::create(dir, "correlations_human.csv", &["chatbot", "variant", "temperature", "rho", "n_points"])?;
    for row in human_corr_rows(report) {
        csv.row(row)?;
    }
    csv.finish()
}

fn write_anova(dir: &Path, report: &MetricsReport) -> Result<PathBuf, AppError> {
    let mut csv = Csv::create(dir, "anova.csv", &["factor", "df", "ss", "ms", "f", "p"])?;
    if let Some(t) = &report.anova {
        for r in &t.rows {
            csv.row([r.factor.clone(), r.df.to_string(), fmt_f(r.ss), fmt_f(r.ms), fmt_opt(r.f), fmt_opt(r.p)])?;
        }
    }
    csv.finish()
}

fn write_summary(dir: &Path, report: &MetricsReport) -> Result<PathBuf, AppError> {
    let conditions: Vec<_> = report
        .conditions
        .iter()
        .map(|c| {
            json!({
                "condition": c.condition.to_string(),
                "effective_n": c.effective_n,
                "rmse_n": c.rmse_n,
                "exclusions": c.exclusions,
            })
        })
        .collect();
    let doc = json!({
        "manifest_id": report.manifest_id,
        "correlation_mode": report.correlation_mode,
        "tokenizers": report.tokenizers.iter().map(|(e, b)| json!({"encoding": e, "backend": b})).collect::<Vec<_>>(),
        "human_n": report.human_stats.first().map_or(0, |s| s.n),
        "conditions": conditions,
        "excluded_conditions": report.conditions.iter().filter(|c| !c.has_data()).map(|c| c.condition.to_string()).collect::<Vec<_>>(),
        "missing_keys": report.missing_keys,
        "pair_gaps": report.pair_gaps,
        "anova_note": report.anova_note,
        "interview_length_association": {
            "rho": report.interview_length.rho,
            "p_value": report.interview_length.p_value,
            "n": report.interview_length.n,
        },
    });
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&doc).map_err(AppError::runtime)? + "\n";
    fs::write(&path, text).map_err(|e| AppError::runtime(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn write_plot_data(dir: &Path, report: &MetricsReport) -> Result<Vec<PathBuf>, AppError> {
    let dir = dir.join("plot_data");
    fs::create_dir_all(&dir).map_err(|e| AppError::runtime(format!("{}: {e}", dir.display())))?;
    let mut out = Vec::new();

    let mut means = Csv::create(&dir, "fig3_item_means.csv", &["chatbot", "variant", "temperature", "item_id", "mean"])?;
    stats_rows(&mut means, report, |s| vec![fmt_f(s.mean)])?;
    out.push(means.finish()?);

    let mut vars = Csv::create(&dir, "fig4_item_variances.csv", &["chatbot", "variant", "temperature", "item_id", "variance"])?;
    stats_rows(&mut vars, report, |s| vec![fmt_opt(s.variance)])?;
    out.push(vars.finish()?);

    let mut fig5 = Csv::create(&dir, "fig5_human_correlations.csv", &["chatbot", "variant", "temperature", "rho", "n_points"])?;
    for row in human_corr_rows(report) {
        fig5.row(row)?;
    }
    out.push(fig5.finish()?);

    let mut fig6 = Csv::create(&dir, "fig6_item_rmse.csv", &["chatbot", "variant", "temperature", "item_id", "rmse"])?;
    let mut fig7 = Csv::create(
        &dir,
        "fig7_person_rmse.csv",
        &["chatbot", "variant", "temperature", "respondent_id", "interview_tokens", "rmse"],
    )?;
    let mut fig8 = Csv::create(&dir, "fig8_test_rmse.csv", &["chatbot", "variant", "temperature", "rmse"])?;
    for c in report.conditions.iter().filter(|c| c.test_rmse.is_some()) {
        let cols = cond_cols(&c.condition);
        for (item_id, v) in &c.item_rmse {
            fig6.row(cols.iter().cloned().chain([item_id.to_string(), fmt_f(*v)]))?;
        }
        for (id, v) in &c.person_rmse {
            let tokens = report.interview_tokens.get(id).map_or_else(|| NA.to_string(), ToString::to_string);
            fig7.row(cols.iter().cloned().chain([id.clone(), tokens, fmt_f(*v)]))?;
        }
        fig8.row(cols.iter().cloned().chain([fmt_opt(c.test_rmse)]))?;
    }
    out.extend([fig6.finish()?, fig7.finish()?, fig8.finish()?]);
    Ok(out)
}

/// Writes the seven CSV tables and `summary.json` into `dir`, plus the
/// long-format figure tables under `dir/plot_data` when asked. Returns the
/// paths written.
pub fn write_report(dir: &Path, report: &MetricsReport, plot_data: bool) -> Result<Vec<PathBuf>, AppError> {
    fs::create_dir_all(dir).map_err(|e| AppError::runtime(format!("{}: {e}", dir.display())))?;
    let mut out = vec![write_item_stats(dir, report)?];
    out.extend(write_rmse(dir, report)?);
    out.push(write_pairs(dir, report)?);
    out.push(write_human_corr(dir, report)?);
    out.push(write_anova(dir, report)?);
    out.push(write_summary(dir, report)?);
    if plot_data {
        out.extend(write_plot_data(dir, report)?);
    }
    Ok(out)
}

