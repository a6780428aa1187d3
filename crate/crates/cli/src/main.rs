//! `silicon-survey`: validate inputs, count prompt tokens, run the simulation
//! and compute alignment reports.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use silicon_survey::gateway::{EnvCredentials, ProviderRegistry, SystemClock};
use silicon_survey::report::{
    cmd_metrics, cmd_simulate, cmd_tokenize, cmd_validate, AppError, MetricsOptions, SimulateOptions,
    WorkspaceConfig, CONFIG_ENV, DEFAULT_CONFIG_FILE,
};
use silicon_survey::runner::Finding;

#[derive(Parser, Debug)]
#[command(name = "silicon-survey", version, about = "Simulate survey respondents with LLMs and measure alignment with human answers")]
struct Cli {
    /// Workspace config file. Defaults to ./silicon-survey.toml when present.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Values that replace the config file's.
#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    instrument: Option<PathBuf>,
    #[arg(long, global = true)]
    roster: Option<PathBuf>,
    #[arg(long, global = true)]
    template: Option<PathBuf>,
    #[arg(long, global = true)]
    providers: Option<PathBuf>,
    /// Token encoding: o200k_base or approx.
    #[arg(long, global = true)]
    encoding: Option<String>,
    /// flattened or per_respondent.
    #[arg(long, global = true)]
    correlation_mode: Option<String>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// error, warn, info, debug or trace. RUST_LOG takes precedence.
    #[arg(long, global = true)]
    log_level: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every load-time check on the configured inputs.
    Validate,
    /// Print token counts of every assembled prompt as CSV.
    Tokenize,
    /// Execute the manifest against its providers.
    Simulate {
        /// Continue an existing run store, skipping finished keys.
        #[arg(long)]
        resume: bool,
    },
    /// Compute the alignment reports from the run store.
    Metrics {
        /// Report on an incomplete store instead of refusing.
        #[arg(long)]
        partial: bool,
        /// Also write long-format figure tables.
        #[arg(long)]
        plot_data: bool,
    },
}

fn resolve_config(config: Option<&Path>, o: Overrides) -> Result<WorkspaceConfig, AppError> {
    let default = Path::new(DEFAULT_CONFIG_FILE);
    let mut cfg = match (config, &o.manifest) {
        (Some(path), _) => WorkspaceConfig::load(path)?,
        (None, _) if default.is_file() => WorkspaceConfig::load(default)?,
        (None, Some(manifest)) => WorkspaceConfig::new(manifest.clone(), "out"),
        (None, None) => {
            return Err(AppError::Validation(vec![Finding::new(
                "config",
                format!("no {DEFAULT_CONFIG_FILE} here; pass --config, set {CONFIG_ENV} or pass --manifest"),
            )]))
        }
    };
    if let Some(p) = o.manifest {
        cfg.manifest = p;
    }
    if let Some(p) = o.output_dir {
        cfg.output_dir = p;
    }
    if o.instrument.is_some() {
        cfg.instrument = o.instrument;
    }
    if o.roster.is_some() {
        cfg.roster = o.roster;
    }
    if o.template.is_some() {
        cfg.template = o.template;
    }
    if o.providers.is_some() {
        cfg.providers = o.providers;
    }
    if let Some(e) = o.encoding {
        cfg.encoding = e;
    }
    if let Some(m) = o.correlation_mode {
        cfg.correlation_mode = m;
    }
    if let Some(w) = o.workers {
        cfg.workers = w;
    }
    if let Some(l) = o.log_level {
        cfg.log_level = l;
    }
    Ok(cfg)
}

fn init_logging(level: &str) {
    let filter = level.parse().unwrap_or(log::LevelFilter::Info);
    env_logger::Builder::new()
        .filter_level(filter)
        .parse_default_env()
        .format(|buf, record| {
            writeln!(
                buf,
                "ts={} level={} target={} {}",
                buf.timestamp_millis(),
                record.level().as_str().to_ascii_lowercase(),
                record.target(),
                record.args()
            )
        })
        .init();
}

fn run(cli: Cli) -> Result<ExitCode, AppError> {
    let cfg = resolve_config(cli.config.as_deref(), cli.overrides)?;
    init_logging(&cfg.log_level);
    let registry = ProviderRegistry::builtin();
    match cli.command {
        Command::Validate => {
            let exp = cmd_validate(&cfg, &registry)?;
            println!(
                "ok manifest={} conditions={} respondents={} run_keys={}",
                exp.manifest.manifest_id,
                exp.manifest.conditions.len(),
                exp.respondent_ids.len(),
                exp.run_keys().len()
            );
        }
        Command::Tokenize => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            cmd_tokenize(&cfg, &registry, &mut lock)?;
        }
        Command::Simulate { resume } => {
            let summary = cmd_simulate(
                &cfg,
                &registry,
                &EnvCredentials,
                Arc::new(SystemClock::new()),
                SimulateOptions { resume, max_new_records: None },
            )?;
            println!("total_keys={}", summary.total_keys);
            println!("already_terminal={}", summary.already_terminal);
            println!("new_records={}", summary.new_records);
            println!("ok={}", summary.ok);
            println!("parse_failed={}", summary.parse_failed);
            println!("transport_failed={}", summary.transport_failed);
            println!("provider_calls={}", summary.provider_calls);
            if let Some(reason) = summary.aborted {
                return Err(AppError::Runtime(format!("batch aborted: {reason}")));
            }
        }
        Command::Metrics { partial, plot_data } => {
            let outcome = cmd_metrics(&cfg, &registry, MetricsOptions { partial, plot_data })?;
            if !outcome.report.missing_keys.is_empty() {
                eprintln!("partial report: {} run keys missing", outcome.report.missing_keys.len());
            }
            for f in &outcome.files {
                println!("{}", f.display());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            match &e {
                AppError::Validation(findings) => {
                    for f in findings {
                        eprintln!("error: {f}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
