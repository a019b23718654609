//! The `sync` / `build` / `report` command line.
//!
//! `sync` ingests raw records into a snapshot, `build` resolves identities
//! and writes `corpus.json` plus `index.json`, and `report` summarizes the
//! selected working groups and renders the per-WG and master documents.
//!
//! Exit codes are a stable contract: 0 success, 2 input or configuration
//! errors, 3 backend or network errors. An optional `insights.toml` in the
//! working directory supplies defaults; flags override the file, and
//! environment variables are only read for secrets plus the API base
//! (`INSIGHTS_API_KEY`, `INSIGHTS_API_BASE`).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use ietf_reporter_core::corpus::{build_corpus, Corpus};
use ietf_reporter_core::index::{build_index, IndexParams, RetrievalIndex};
use ietf_reporter_core::llm::mock::MockBackend;
use ietf_reporter_core::llm::summarize::{summarize_wg, PromptTemplates, SummarizeError};
use ietf_reporter_core::llm::{BackendPolicy, Clock, DispatchGate, LlmBackend, LlmClient, SimClock};
use ietf_reporter_core::report::{
    assemble_master, compose, render, OutputFormat, WgReport, DEFAULT_ATTRIBUTION,
};
use ietf_reporter_core::resolve::{resolve_attendance, Thresholds};
use serde::Deserialize;

use crate::backends::{
    context_tokens_for, ApiBackend, LocalBackend, SharedGate, SystemClock, API_BASE_ENV,
    API_KEY_ENV,
};
use crate::ingest::{fetch_sessions, load_attendance, IngestError, SourceConfig};
use crate::store::{
    load_corpus, load_index, load_snapshot, save_corpus, save_index, save_snapshot, Snapshot,
    StoreError,
};
use crate::util::{now_rfc3339, parallel_map};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

/// Config file read from the working directory when present.
pub const CONFIG_FILE: &str = "insights.toml";

const DEFAULT_OUT_DIR: &str = "out";
const DEFAULT_TIMEOUT_MS: u64 = 10_000;
const DEFAULT_REPORT_PARALLELISM: usize = 2;
const DEFAULT_LOCAL_BASE: &str = "http://localhost:11434";

#[derive(Parser)]
#[command(
    name = "ietf-reporter",
    version,
    about = "Consolidates IETF meeting records and generates per-WG reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch raw meeting records from the mirror or API into a snapshot
    Sync(SyncArgs),
    /// Resolve identities and build corpus.json and index.json
    Build(BuildArgs),
    /// Summarize working groups and render per-WG plus master documents
    Report(ReportArgs),
}

#[derive(Args)]
struct SyncArgs {
    /// Meeting number to process
    #[arg(long)]
    meeting: Option<u32>,
    /// Output directory root
    #[arg(long)]
    out: Option<PathBuf>,
    /// Local mirror root (takes precedence over the API)
    #[arg(long)]
    mirror: Option<PathBuf>,
    /// Datatracker-style API base URL
    #[arg(long = "api-base")]
    api_base: Option<String>,
    /// Emit a single-line machine-readable run summary
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BuildArgs {
    /// Meeting number to process
    #[arg(long)]
    meeting: Option<u32>,
    /// Output directory root
    #[arg(long)]
    out: Option<PathBuf>,
    /// Affiliation clustering threshold (0, 100]
    #[arg(long = "affil-threshold")]
    affil_threshold: Option<f64>,
    /// Person clustering threshold (0, 100]
    #[arg(long = "person-threshold")]
    person_threshold: Option<f64>,
    /// Corpus timestamp (RFC 3339); defaults to now
    #[arg(long)]
    timestamp: Option<String>,
    /// Emit a single-line machine-readable run summary
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Meeting number to process
    #[arg(long)]
    meeting: Option<u32>,
    /// Output directory root
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Working groups to report on (comma separated); default: all
    #[arg(long = "wg", value_delimiter = ',')]
    wg: Option<Vec<String>>,
    /// Completion backend
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Model name sent to the backend
    #[arg(long)]
    model: Option<String>,
    /// Backend base URL (api and local backends)
    #[arg(long = "api-base")]
    api_base: Option<String>,
    /// Concurrent working-group summarizations
    #[arg(long)]
    parallelism: Option<usize>,
    /// Emit a single-line machine-readable run summary
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Md,
    Tex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Mock,
    Api,
    Local,
}

/// Defaults read from `insights.toml`. Unknown keys are ignored.
#[derive(Debug, Default, Deserialize)]
pub struct FileConfig {
    meeting: Option<u32>,
    format: Option<String>,
    wg: Option<Vec<String>>,
    backend: Option<String>,
    model: Option<String>,
    out: Option<PathBuf>,
    mirror: Option<PathBuf>,
    api_base: Option<String>,
    affil_threshold: Option<f64>,
    person_threshold: Option<f64>,
    parallelism: Option<usize>,
    timeout_ms: Option<u64>,
    attribution: Option<String>,
    requests_per_minute: Option<u32>,
    budget_tokens: Option<u32>,
    overlap_tokens: Option<u32>,
}

impl FileConfig {
    fn load(dir: &Path) -> Result<FileConfig, CmdError> {
        let path = dir.join(CONFIG_FILE);
        let Ok(text) = fs::read_to_string(&path) else {
            return Ok(FileConfig::default());
        };
        toml::from_str(&text).map_err(|e| {
            CmdError::input(format!("config file {}: {e}", path.display()))
        })
    }
}

/// A command failure mapped to the exit-code contract.
#[derive(Debug)]
pub struct CmdError {
    pub exit: i32,
    pub message: String,
}

impl CmdError {
    fn input(message: impl Into<String>) -> Self {
        CmdError {
            exit: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn backend(message: impl Into<String>) -> Self {
        CmdError {
            exit: EXIT_BACKEND,
            message: message.into(),
        }
    }
}

impl From<IngestError> for CmdError {
    fn from(err: IngestError) -> Self {
        match err {
            IngestError::Network(_) => CmdError::backend(err.to_string()),
            _ => CmdError::input(err.to_string()),
        }
    }
}

impl From<StoreError> for CmdError {
    fn from(err: StoreError) -> Self {
        CmdError::input(err.to_string())
    }
}

impl From<SummarizeError> for CmdError {
    fn from(err: SummarizeError) -> Self {
        match err {
            SummarizeError::UnknownWg(_) => CmdError::input(err.to_string()),
            _ => CmdError::backend(err.to_string()),
        }
    }
}

/// Entry point shared by `main` and the tests.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INPUT,
            };
            let _ = err.print();
            return code;
        }
    };

    let (name, json, outcome) = match &cli.command {
        Command::Sync(args) => ("sync", args.json, cmd_sync(args)),
        Command::Build(args) => ("build", args.json, cmd_build(args)),
        Command::Report(args) => ("report", args.json, cmd_report(args)),
    };

    match outcome {
        Ok(outputs) => {
            if json {
                println!("{}", run_summary(name, true, &outputs, &[]));
            } else {
                for path in &outputs {
                    println!("wrote {}", path.display());
                }
            }
            EXIT_OK
        }
        Err(err) => {
            if json {
                println!("{}", run_summary(name, false, &[], &[err.message.clone()]));
            } else {
                eprintln!("error: {}", err.message);
            }
            err.exit
        }
    }
}

fn run_summary(command: &str, ok: bool, outputs: &[PathBuf], errors: &[String]) -> String {
    serde_json::json!({
        "command": command,
        "ok": ok,
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "errors": errors,
    })
    .to_string()
}

fn require_meeting(flag: Option<u32>, file: &FileConfig) -> Result<u32, CmdError> {
    flag.or(file.meeting)
        .ok_or_else(|| CmdError::input("--meeting is required (flag or insights.toml)"))
}

fn out_root(flag: &Option<PathBuf>, file: &FileConfig) -> PathBuf {
    flag.clone()
        .or_else(|| file.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn meeting_dir(flag: &Option<PathBuf>, file: &FileConfig, meeting: u32) -> PathBuf {
    out_root(flag, file).join(meeting.to_string())
}

fn cmd_sync(args: &SyncArgs) -> Result<Vec<PathBuf>, CmdError> {
    let file = FileConfig::load(Path::new("."))?;
    let meeting = require_meeting(args.meeting, &file)?;
    let cfg = SourceConfig {
        api_base_url: args
            .api_base
            .clone()
            .or_else(|| file.api_base.clone())
            .or_else(|| std::env::var(API_BASE_ENV).ok()),
        mirror_root: args.mirror.clone().or_else(|| file.mirror.clone()),
        meeting_number: meeting,
        timeout_ms: file.timeout_ms.unwrap_or(DEFAULT_TIMEOUT_MS),
    };

    let sessions = fetch_sessions(&cfg)?;
    let attendance = load_attendance(&cfg)?;
    let snapshot = Snapshot {
        meeting_number: meeting,
        sessions,
        attendance: attendance.rows,
        skipped_rows: attendance.skipped,
    };
    let path = save_snapshot(&snapshot, &meeting_dir(&args.out, &file, meeting))?;
    Ok(vec![path])
}

fn cmd_build(args: &BuildArgs) -> Result<Vec<PathBuf>, CmdError> {
    let file = FileConfig::load(Path::new("."))?;
    let meeting = require_meeting(args.meeting, &file)?;
    let dir = meeting_dir(&args.out, &file, meeting);

    let snapshot = load_snapshot(&dir)?;
    let thresholds = Thresholds {
        affiliation: args
            .affil_threshold
            .or(file.affil_threshold)
            .unwrap_or(Thresholds::default().affiliation),
        person: args
            .person_threshold
            .or(file.person_threshold)
            .unwrap_or(Thresholds::default().person),
    };
    let resolution = resolve_attendance(&snapshot.attendance, &thresholds)
        .map_err(|e| CmdError::input(e.to_string()))?;
    let corpus = build_corpus(
        meeting,
        snapshot.sessions,
        resolution.ledger,
        resolution.entities,
        args.timestamp.clone().unwrap_or_else(now_rfc3339),
    )
    .map_err(|e| CmdError::input(e.to_string()))?;
    let params = IndexParams {
        budget_tokens: file.budget_tokens.unwrap_or(IndexParams::default().budget_tokens),
        overlap_tokens: file.overlap_tokens.unwrap_or(IndexParams::default().overlap_tokens),
    };
    let index = build_index(&corpus, &params).map_err(|e| CmdError::input(e.to_string()))?;

    Ok(vec![save_corpus(&corpus, &dir)?, save_index(&index, &dir)?])
}

fn cmd_report(args: &ReportArgs) -> Result<Vec<PathBuf>, CmdError> {
    let file = FileConfig::load(Path::new("."))?;
    let meeting = require_meeting(args.meeting, &file)?;
    let dir = meeting_dir(&args.out, &file, meeting);

    let format = match args.format {
        Some(FormatArg::Md) => OutputFormat::Markdown,
        Some(FormatArg::Tex) => OutputFormat::Latex,
        None => match file.format.as_deref() {
            None | Some("md") => OutputFormat::Markdown,
            Some("tex") => OutputFormat::Latex,
            Some(other) => {
                return Err(CmdError::input(format!(
                    "config format must be md or tex, got {other:?}"
                )))
            }
        },
    };
    let backend = match args.backend {
        Some(kind) => kind,
        None => match file.backend.as_deref() {
            None | Some("mock") => BackendArg::Mock,
            Some("api") => BackendArg::Api,
            Some("local") => BackendArg::Local,
            Some(other) => {
                return Err(CmdError::input(format!(
                    "config backend must be mock, api or local, got {other:?}"
                )))
            }
        },
    };

    let corpus = load_corpus(&dir)?;
    let index = load_index(&dir)?;

    let selected: Vec<String> = match args.wg.clone().or_else(|| file.wg.clone()) {
        Some(list) if list.is_empty() => {
            return Err(CmdError::input("--wg given without any acronyms"))
        }
        Some(list) => list,
        None => corpus.sessions.keys().cloned().collect(),
    };
    let unknown: Vec<&String> = selected
        .iter()
        .filter(|wg| !corpus.sessions.contains_key(*wg))
        .collect();
    if !unknown.is_empty() {
        return Err(CmdError::input(format!(
            "unknown working groups: {}",
            unknown
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }

    let parallelism = args
        .parallelism
        .or(file.parallelism)
        .unwrap_or(DEFAULT_REPORT_PARALLELISM)
        .max(1);
    let mut policy = BackendPolicy::default();
    if let Some(rpm) = file.requests_per_minute {
        policy.requests_per_minute = rpm.max(1);
    }
    let attribution = file
        .attribution
        .clone()
        .unwrap_or_else(|| DEFAULT_ATTRIBUTION.to_string());
    let timeout_ms = file.timeout_ms.unwrap_or(DEFAULT_TIMEOUT_MS);
    let gate = SharedGate::new(policy.requests_per_minute);

    let base_url = args.api_base.clone().or_else(|| file.api_base.clone());
    match backend {
        BackendArg::Mock => {
            // Simulated clock: mock runs never wait on the wall clock.
            let clock = SimClock::new();
            let backend = MockBackend::default();
            run_reports(
                &corpus, &index, &selected, format, parallelism, &attribution, &dir,
                LlmClient::new(&backend, &gate, &clock, policy),
            )
        }
        BackendArg::Api => {
            let base = base_url
                .or_else(|| std::env::var(API_BASE_ENV).ok())
                .ok_or_else(|| {
                    CmdError::input(format!(
                        "api backend needs a base URL (--api-base, config, or {API_BASE_ENV})"
                    ))
                })?;
            let model = args
                .model
                .clone()
                .or_else(|| file.model.clone())
                .unwrap_or_else(|| "gpt-4o".to_string());
            let backend = ApiBackend::new(
                base,
                model.clone(),
                std::env::var(API_KEY_ENV).ok(),
                context_tokens_for(&model),
                timeout_ms,
            );
            let clock = SystemClock::new();
            run_reports(
                &corpus, &index, &selected, format, parallelism, &attribution, &dir,
                LlmClient::new(&backend, &gate, &clock, policy),
            )
        }
        BackendArg::Local => {
            let base = base_url.unwrap_or_else(|| DEFAULT_LOCAL_BASE.to_string());
            let model = args
                .model
                .clone()
                .or_else(|| file.model.clone())
                .unwrap_or_else(|| "llama3".to_string());
            let backend = LocalBackend::new(
                base,
                model.clone(),
                context_tokens_for(&model),
                timeout_ms,
            );
            let clock = SystemClock::new();
            run_reports(
                &corpus, &index, &selected, format, parallelism, &attribution, &dir,
                LlmClient::new(&backend, &gate, &clock, policy),
            )
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_reports<B, G, C>(
    corpus: &Corpus,
    index: &RetrievalIndex,
    selected: &[String],
    format: OutputFormat,
    parallelism: usize,
    attribution: &str,
    dir: &Path,
    client: LlmClient<B, G, C>,
) -> Result<Vec<PathBuf>, CmdError>
where
    B: LlmBackend + Sync,
    G: DispatchGate + Sync,
    C: Clock + Sync,
{
    let templates = PromptTemplates::default();
    let client = &client;
    let templates = &templates;

    let summaries = parallel_map(selected.to_vec(), parallelism, |wg| {
        summarize_wg(corpus, index, &wg, client, templates).map(|summary| (wg, summary))
    });

    let mut reports: Vec<WgReport> = Vec::new();
    for outcome in summaries {
        let (wg, summary) = outcome?;
        let session = &corpus.sessions[&wg];
        let report =
            compose(&summary, session).map_err(|e| CmdError::input(e.to_string()))?;
        reports.push(report);
    }
    reports.sort_by(|a, b| a.wg_acronym.cmp(&b.wg_acronym));

    // Writes stay on this thread so partial output never interleaves.
    let mut outputs = Vec::new();
    for report in &reports {
        let rendered = render(report, format);
        let path = dir.join(format!("{}.{}", report.wg_acronym, format.extension()));
        fs::write(&path, rendered.body.as_bytes()).map_err(|e| {
            CmdError::input(format!("cannot write {}: {e}", path.display()))
        })?;
        outputs.push(path);
    }

    let master = assemble_master(&reports, corpus.meeting_number, format, attribution)
        .map_err(|e| CmdError::input(e.to_string()))?;
    let master_path = dir.join(format!("report.{}", format.extension()));
    fs::write(&master_path, master.body.as_bytes()).map_err(|e| {
        CmdError::input(format!("cannot write {}: {e}", master_path.display()))
    })?;
    outputs.push(master_path);
    Ok(outputs)
}

/// Long help for every subcommand, concatenated. The doc-sync test holds
/// this against the documented flag list.
pub fn full_help() -> String {
    let mut cmd = Cli::command();
    let mut out = cmd.render_long_help().to_string();
    for name in ["sync", "build", "report"] {
        let mut sub = cmd
            .find_subcommand_mut(name)
            .expect("subcommand exists")
            .clone();
        out.push('\n');
        out.push_str(&sub.render_long_help().to_string());
    }
    out
}

/// Maps session acronyms to their record for lookups in tests.
pub fn session_map(corpus: &Corpus) -> BTreeMap<&str, &ietf_reporter_core::corpus::SessionRecord> {
    corpus
        .sessions
        .iter()
        .map(|(k, v)| (k.as_str(), v))
        .collect()
}
