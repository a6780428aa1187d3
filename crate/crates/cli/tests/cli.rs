use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name).canonicalize().unwrap()
}

/// Runs the binary inside `dir` with no inherited config or credentials.
fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_silicon-survey"))
        .args(args)
        .current_dir(dir)
        .env_remove("SILICON_SURVEY_CONFIG")
        .env_remove("OPENAI_API_KEY")
        .env_remove("ANTHROPIC_API_KEY")
        .env_remove("GEMINI_API_KEY")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("silicon-survey.toml");
    std::fs::write(
        &path,
        format!("manifest = {:?}\noutput_dir = \"out\"\nlog_level = \"warn\"\n{extra}", data("manifest.mock.toml")),
    )
    .unwrap();
    path
}

#[test]
fn validate_accepts_shipped_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    let o = run(dir.path(), &["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("conditions=24 respondents=3 run_keys=72"));
}

#[test]
fn validate_without_config_is_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["validate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("silicon-survey.toml"));
}

#[test]
fn out_of_range_roster_rating_is_named() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    let roster = std::fs::read_to_string(data("roster.synthetic.jsonl")).unwrap();
    let bad = roster.replacen("\"observed_ratings\": [1,", "\"observed_ratings\": [0,", 1);
    assert_ne!(bad, roster);
    std::fs::write(dir.path().join("bad.jsonl"), bad).unwrap();
    let o = run(dir.path(), &["validate", "--roster", "bad.jsonl"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("bad.jsonl") && err.contains("respondent R01: item 1 rating 0 outside [1, 6]"), "{err}");
}

#[test]
fn template_without_survey_items_is_named() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    let template = std::fs::read_to_string(data("template.txt")).unwrap().replace("{{survey_items}}", "");
    std::fs::write(dir.path().join("t.txt"), template).unwrap();
    let o = run(dir.path(), &["validate", "--template", "t.txt"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("survey_items"), "{}", stderr(&o));
}

#[test]
fn tokenize_prints_one_row_per_prompt() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    let o = run(dir.path(), &["tokenize", "--encoding", "approx"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "respondent_id,variant,token_count,encoding,backend");
    assert_eq!(lines.len(), 1 + 3 * 4);
    assert!(lines[1].starts_with("R01,P_BR,") && lines[1].ends_with(",approx,approx-whitespace-punct"), "{}", lines[1]);
}

#[test]
fn full_pipeline_resume_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");

    let o = run(dir.path(), &["metrics"]);
    assert_eq!(o.status.code(), Some(2), "empty store must be refused: {}", stderr(&o));

    let o = run(dir.path(), &["simulate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("ok=72") && out.contains("provider_calls=72"), "{out}");

    let o = run(dir.path(), &["simulate"]);
    assert_eq!(o.status.code(), Some(2), "existing store without --resume");

    let o = run(dir.path(), &["simulate", "--resume"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("new_records=0") && stdout(&o).contains("provider_calls=0"));

    let o = run(dir.path(), &["metrics", "--plot-data"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let metrics = dir.path().join("out/metrics/breq-mock");
    for f in [
        "item_stats.csv",
        "rmse_item.csv",
        "rmse_person.csv",
        "rmse_test.csv",
        "correlations_pairs.csv",
        "correlations_human.csv",
        "anova.csv",
        "summary.json",
        "plot_data/fig3_item_means.csv",
        "plot_data/fig8_test_rmse.csv",
    ] {
        assert!(metrics.join(f).is_file(), "{f} missing");
    }
}

#[test]
fn partial_store_needs_the_partial_flag() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    assert_eq!(run(dir.path(), &["simulate"]).status.code(), Some(0));
    let store = dir.path().join("out/runs/breq-mock.jsonl");
    let text = std::fs::read_to_string(&store).unwrap();
    let kept: String = text.lines().take(50).map(|l| format!("{l}\n")).collect();
    std::fs::write(&store, kept).unwrap();

    let o = run(dir.path(), &["metrics"]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("22 missing run keys") && err.contains("gemini/P_BR_PI_DI/0.5/R03#0"), "{err}");

    let o = run(dir.path(), &["metrics", "--partial"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = std::fs::read_to_string(dir.path().join("out/metrics/breq-mock/summary.json")).unwrap();
    assert!(summary.contains("gemini/P_BR_PI_DI/0.5/R03#0"));
    assert_eq!(std::fs::read_to_string(&store).unwrap().lines().count(), 50, "metrics must not touch the store");
}

#[test]
fn missing_credential_aborts_before_any_request() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), &format!("providers = {:?}\n", data("providers.live.toml")));
    let o = run(dir.path(), &["simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("OPENAI_API_KEY"), "{}", stderr(&o));
    let store = dir.path().join("out/runs/breq-mock.jsonl");
    assert!(!store.exists() || std::fs::read_to_string(store).unwrap().is_empty());
}

#[test]
fn identical_mocks_correlate_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let providers: String = ["gpt", "claude", "gemini"]
        .iter()
        .map(|n| format!("[[providers]]\nname = \"{n}\"\nkind = \"mock\"\nmock_seed = 5\n\n"))
        .collect();
    std::fs::write(dir.path().join("same.toml"), providers).unwrap();
    write_config(dir.path(), "providers = \"same.toml\"\n");
    assert_eq!(run(dir.path(), &["simulate"]).status.code(), Some(0));
    let o = run(dir.path(), &["metrics"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let pairs = std::fs::read_to_string(dir.path().join("out/metrics/breq-mock/correlations_pairs.csv")).unwrap();
    let rows: Vec<&str> = pairs.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    for row in rows {
        assert!(row.split(',').skip(2).all(|v| v == "1"), "{row}");
    }
    let anova = std::fs::read_to_string(dir.path().join("out/metrics/breq-mock/anova.csv")).unwrap();
    assert!(anova.lines().nth(1).unwrap().ends_with(",NA,NA"), "{anova}");
}

#[test]
fn config_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let elsewhere = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_silicon-survey"))
        .arg("validate")
        .current_dir(elsewhere.path())
        .env("SILICON_SURVEY_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn unknown_correlation_mode_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    let o = run(dir.path(), &["validate", "--correlation-mode", "spearman"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("spearman"));
}
