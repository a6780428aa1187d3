use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use silicon_survey::gateway::{ProviderRegistry, VirtualClock};
use silicon_survey::report::{
    cmd_metrics, cmd_simulate, cmd_validate, AppError, MetricsOptions, SimulateOptions, WorkspaceConfig,
};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn simulated(out: &Path) -> WorkspaceConfig {
    let cfg = WorkspaceConfig::new(data("manifest.mock.toml"), out);
    cmd_simulate(
        &cfg,
        &ProviderRegistry::builtin(),
        &BTreeMap::<String, String>::new(),
        Arc::new(VirtualClock::new()),
        SimulateOptions::default(),
    )
    .unwrap();
    cfg
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn all_parse_failures_exclude_the_condition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = simulated(dir.path());
    let store = cfg.store_path("breq-mock");
    let rewritten: String = read(&store)
        .lines()
        .map(|line| {
            let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
            let k = &v["key"];
            if k["chatbot"] == "gpt" && k["variant"] == "P_BR" && k["temperature"] == 0.0 {
                v["status"] = "parse_failed".into();
                v["parsed"] = serde_json::Value::Null;
                v["error"] = "no ratings found".into();
            }
            format!("{v}\n")
        })
        .collect();
    std::fs::write(&store, rewritten).unwrap();

    let out = cmd_metrics(&cfg, &ProviderRegistry::builtin(), MetricsOptions::default()).unwrap();
    let excluded = out.report.conditions.iter().find(|c| c.condition.to_string() == "gpt/P_BR/0").unwrap();
    assert_eq!(excluded.effective_n, 0);
    assert_eq!(excluded.exclusions.len(), 3);
    assert!(excluded.exclusions.iter().all(|e| e.reason == "parse_failed"));

    for f in ["rmse_item.csv", "rmse_person.csv", "rmse_test.csv", "item_stats.csv"] {
        let text = read(&out.dir.join(f));
        assert!(!text.lines().any(|l| l.starts_with("gpt,P_BR,0,")), "{f} still reports the condition");
    }
    assert_eq!(read(&out.dir.join("rmse_test.csv")).lines().count(), 1 + 23);

    // the gpt pairs in that cell become undefined, so the ANOVA is not computable
    let pairs = read(&out.dir.join("correlations_pairs.csv"));
    assert!(pairs.lines().any(|l| l == "0,P_BR,NA,NA,".to_string() + l.rsplit(',').next().unwrap()));
    assert_eq!(read(&out.dir.join("anova.csv")).lines().count(), 1);

    let summary: serde_json::Value = serde_json::from_str(&read(&out.dir.join("summary.json"))).unwrap();
    assert_eq!(summary["excluded_conditions"], serde_json::json!(["gpt/P_BR/0"]));
    assert!(summary["anova_note"].as_str().unwrap().contains("undefined"));
    let human = read(&out.dir.join("correlations_human.csv"));
    assert!(human.lines().any(|l| l.starts_with("gpt,P_BR,mean,NA,")), "{human}");
}

#[test]
fn per_respondent_mode_and_summary_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = simulated(dir.path());
    cfg.correlation_mode = "per_respondent".into();
    let out = cmd_metrics(&cfg, &ProviderRegistry::builtin(), MetricsOptions { partial: false, plot_data: true }).unwrap();
    assert_eq!(out.report.correlation_mode, "per_respondent");
    assert_eq!(out.files.len(), 8 + 6);
    let summary: serde_json::Value = serde_json::from_str(&read(&out.dir.join("summary.json"))).unwrap();
    assert_eq!(summary["correlation_mode"], "per_respondent");
    assert_eq!(summary["tokenizers"][0]["encoding"], "o200k_base");
    assert_eq!(summary["conditions"].as_array().unwrap().len(), 24);
    assert_eq!(summary["interview_length_association"]["n"], 3);
    let fig7 = read(&out.dir.join("plot_data/fig7_person_rmse.csv"));
    assert_eq!(fig7.lines().next().unwrap(), "chatbot,variant,temperature,respondent_id,interview_tokens,rmse");
    assert_eq!(fig7.lines().count(), 1 + 72);
}

#[test]
fn metrics_are_identical_across_worker_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg_a = simulated(a.path());
    let mut cfg_b = WorkspaceConfig::new(data("manifest.mock.toml"), b.path());
    cfg_b.workers = 1;
    cmd_simulate(
        &cfg_b,
        &ProviderRegistry::builtin(),
        &BTreeMap::<String, String>::new(),
        Arc::new(VirtualClock::new()),
        SimulateOptions::default(),
    )
    .unwrap();
    assert_eq!(read(&cfg_a.store_path("breq-mock")), read(&cfg_b.store_path("breq-mock")));
}

#[test]
fn validation_collects_findings_from_every_resource() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("t.txt"), "{{background}} {{bogus}}").unwrap();
    let mut cfg = WorkspaceConfig::new(data("manifest.mock.toml"), dir.path());
    cfg.template = Some(dir.path().join("t.txt"));
    cfg.roster = Some(dir.path().join("missing.jsonl"));
    cfg.encoding = "cl100k".into();
    let Err(AppError::Validation(findings)) = cmd_validate(&cfg, &ProviderRegistry::builtin()) else {
        panic!("expected validation failure");
    };
    let text: Vec<String> = findings.iter().map(ToString::to_string).collect();
    assert!(text.iter().any(|f| f.contains("cl100k")), "{text:?}");
    assert!(text.iter().any(|f| f.contains("missing.jsonl")), "{text:?}");
    assert!(text.iter().any(|f| f.contains("bogus")), "{text:?}");
    assert!(text.iter().any(|f| f.contains("survey_items")), "{text:?}");
}
