//! Command-line surface. `main.rs` only parses arguments and exits with the
//! code returned by [`run_cli`].
//!
//! Exit codes: 0 success, 1 replay mismatch, 2 run aborted on limits,
//! 3 run aborted on a backend failure, 4 configuration or input error.

use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::agents::{bundled_profile, AgentProfile, Team};
use crate::config::{ConfigError, RunConfig, SearchMode, CONFIG_KEYS};
use crate::conversation::{mask_timestamps, parse_log, FINAL_REPORT_FILE};
use crate::knowledge::{load_knowledge_base, KnowledgeBase, KnowledgeError};
use crate::llm::{
    BackendError, BackendKind, ChatBackend, OpenAiBackend, RecordingBackend, Script, ScriptedBackend,
};
use crate::orchestrator::{
    DirSink, Engine, EngineSettings, OrchestratorError, RunReport, RunState, SystemClock,
    WorkflowDefinition, REPORT_FILE, TRANSCRIPT_FILE,
};
use crate::tools::{
    build_registry, render_principle_ids, FixtureSearch, RagError, RagStore, RecordingSearch,
    SearchProvider, TavilySearch, ToolRegistry,
};

pub const RECORDED_SCRIPT_FILE: &str = "recorded.script";
pub const SEARCH_TAPE_FILE: &str = "search_tape.json";
pub const CONFIG_FILE: &str = "config.toml";

pub const EXIT_OK: i32 = 0;
pub const EXIT_REPLAY_MISMATCH: i32 = 1;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Rag(#[from] RagError),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Orchestrator(#[from] OrchestratorError),
    #[error("replay diverged at {location}\n  recorded: {recorded}\n  replayed: {replayed}")]
    Mismatch {
        location: String,
        recorded: String,
        replayed: String,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Mismatch { .. } => EXIT_REPLAY_MISMATCH,
            _ => EXIT_CONFIG,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Live,
    Scripted,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SearchArg {
    Fixture,
    Live,
}

fn config_keys_help() -> String {
    let mut s = String::from("Config keys (file sections or --set KEY=VALUE):\n");
    for (k, d) in CONFIG_KEYS {
        s.push_str(&format!("  {k:<34} {d}\n"));
    }
    s.push_str("\nExit codes: 0 ok, 1 replay mismatch, 2 aborted on limits, 3 aborted on backend, 4 config error");
    s
}

#[derive(Debug, Parser)]
#[command(name = "triz-agents", version, about = "Multi-agent TRIZ problem solving", after_help = config_keys_help())]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Root directory for run artifacts (output.dir).
    #[arg(long, global = true, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Model backend (backend.kind).
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendArg>,
    /// Script for the scripted backend (backend.script).
    #[arg(long, global = true, value_name = "FILE")]
    pub script: Option<PathBuf>,
    /// Web search provider (search.mode).
    #[arg(long, global = true, value_enum)]
    pub search: Option<SearchArg>,
    /// Override any config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// More output; -v prints the effective config.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the workflow on a problem statement file.
    Run {
        problem: PathBuf,
        /// Run directory name under the output dir (default: timestamp).
        #[arg(long)]
        run_id: Option<String>,
    },
    /// Look up the contradiction matrix by parameter id or name.
    Matrix { improving: String, worsening: String },
    /// List the 39 parameters.
    Params,
    /// List the 40 principles, or describe the given ids.
    Principles { ids: Vec<u32> },
    /// Manage and query the retrieval store.
    Rag {
        #[command(subcommand)]
        command: RagCommand,
    },
    /// Re-run a recorded run and check its artifacts are reproduced.
    Replay { run_dir: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum RagCommand {
    /// Add .md/.txt files or directories to a store.
    Ingest {
        paths: Vec<PathBuf>,
        /// Store file, created if absent.
        #[arg(long)]
        index: Option<PathBuf>,
        /// Start a new store with the TRIZ parameter and principle texts.
        #[arg(long)]
        seed: bool,
    },
    /// Rank chunks for a query.
    Query {
        query: String,
        #[arg(short, long)]
        k: Option<usize>,
        /// Store file (default: TRIZ texts plus rag.corpus_dir).
        #[arg(long)]
        index: Option<PathBuf>,
    },
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    init_tracing(cli.verbose);
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_tracing(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_target(false)
        .try_init();
}

/// File config with command-line overrides applied on top.
pub fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &cli.output_dir {
        cfg.output.dir = dir.clone();
    }
    if let Some(b) = cli.backend {
        cfg.backend.kind = match b {
            BackendArg::Live => BackendKind::Live,
            BackendArg::Scripted => BackendKind::Scripted,
        };
    }
    if let Some(s) = &cli.script {
        cfg.backend.script = Some(s.clone());
        if cli.backend.is_none() {
            cfg.backend.kind = BackendKind::Scripted;
        }
    }
    if let Some(s) = cli.search {
        cfg.search.mode = match s {
            SearchArg::Fixture => SearchMode::Fixture,
            SearchArg::Live => SearchMode::Live,
        };
    }
    for assignment in &cli.set {
        cfg.set(assignment)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    let cfg = effective_config(cli)?;
    if cli.verbose >= 1 {
        eprintln!("# effective config\n{}", cfg.to_toml());
    }
    match &cli.command {
        Command::Run { problem, run_id } => cmd_run(&cfg, problem, run_id.as_deref()),
        Command::Matrix { improving, worsening } => cmd_matrix(&cfg, improving, worsening),
        Command::Params => {
            let kb = knowledge(&cfg)?;
            for p in kb.parameters() {
                println!("{:>2}. {}", p.id, p.name);
            }
            Ok(EXIT_OK)
        }
        Command::Principles { ids } => cmd_principles(&cfg, ids),
        Command::Rag { command } => cmd_rag(&cfg, command),
        Command::Replay { run_dir } => cmd_replay(run_dir),
    }
}

fn knowledge(cfg: &RunConfig) -> Result<KnowledgeBase, CliError> {
    Ok(match &cfg.knowledge.data_dir {
        Some(dir) => load_knowledge_base(dir)?,
        None => KnowledgeBase::bundled(),
    })
}

fn cmd_matrix(cfg: &RunConfig, improving: &str, worsening: &str) -> Result<i32, CliError> {
    let kb = knowledge(cfg)?;
    let resolve = |key: &str| {
        kb.resolve_parameter(key).map_err(|e| {
            let hints: Vec<String> = kb
                .parameter_candidates(key)
                .iter()
                .map(|p| format!("{}. {}", p.id, p.name))
                .collect();
            if hints.is_empty() {
                CliError::Input(format!("{e}; run `params` for the full list"))
            } else {
                CliError::Input(format!("{e}; candidates:\n  {}", hints.join("\n  ")))
            }
        })
    };
    let i = resolve(improving)?;
    let w = resolve(worsening)?;
    let ids = kb.lookup_matrix(i.get(), w.get())?;
    println!("Improving: {}. {}", i, kb.parameter(i).name);
    println!("Worsening: {}. {}", w, kb.parameter(w).name);
    if ids.is_empty() {
        println!("{}", crate::tools::NO_PRINCIPLES_MESSAGE);
    } else {
        println!("{}", render_principle_ids(&kb, ids));
    }
    Ok(EXIT_OK)
}

fn cmd_principles(cfg: &RunConfig, ids: &[u32]) -> Result<i32, CliError> {
    let kb = knowledge(cfg)?;
    if ids.is_empty() {
        for p in kb.principles() {
            println!("{:>2}. {}", p.id, p.name);
        }
        return Ok(EXIT_OK);
    }
    for p in kb.principle_details(ids)? {
        println!("{}. {}\n   {}", p.id, p.name, p.description);
        for s in &p.sub_principles {
            println!("   - {s}");
        }
    }
    Ok(EXIT_OK)
}

fn load_store(path: &Path) -> Result<RagStore, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read index {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("index {} is not a store: {e}", path.display())))
}

fn cmd_rag(cfg: &RunConfig, command: &RagCommand) -> Result<i32, CliError> {
    match command {
        RagCommand::Ingest { paths, index, seed } => {
            let mut store = match index {
                Some(p) if p.exists() => load_store(p)?,
                _ if *seed => RagStore::seeded(&knowledge(cfg)?, cfg.rag_config())?,
                _ => RagStore::new(cfg.rag_config())?,
            };
            let mut stats = Vec::new();
            for path in paths {
                if path.is_dir() {
                    stats.extend(store.ingest_dir(path)?);
                } else {
                    let body = std::fs::read_to_string(path)
                        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                    let id = path
                        .file_name()
                        .map(|n| n.to_string_lossy().into_owned())
                        .unwrap_or_else(|| path.display().to_string());
                    stats.push(store.ingest(&id, &body)?);
                }
            }
            for s in &stats {
                println!("{}\tchars={}\tchunks={}\ttokens={}", s.doc_id, s.chars, s.chunks, s.tokens);
            }
            let chunks: usize = stats.iter().map(|s| s.chunks).sum();
            println!(
                "ingested {} documents, {} chunks; store holds {} documents, {} chunks",
                stats.len(),
                chunks,
                store.doc_count(),
                store.chunks().len()
            );
            if let Some(p) = index {
                let json = serde_json::to_string(&store).expect("store serializes");
                std::fs::write(p, json)
                    .map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display())))?;
            }
            Ok(EXIT_OK)
        }
        RagCommand::Query { query, k, index } => {
            let store = match index {
                Some(p) => load_store(p)?,
                None => default_store(cfg, &knowledge(cfg)?)?,
            };
            let answer = store.query(query, k.unwrap_or(cfg.rag.k))?;
            println!("{}", answer.context);
            Ok(EXIT_OK)
        }
    }
}

fn default_store(cfg: &RunConfig, kb: &KnowledgeBase) -> Result<RagStore, CliError> {
    let mut store = RagStore::seeded(kb, cfg.rag_config())?;
    if let Some(dir) = &cfg.rag.corpus_dir {
        store.ingest_dir(dir)?;
    }
    Ok(store)
}

fn new_run_id() -> String {
    format!("run-{}", chrono::Utc::now().format("%Y%m%dT%H%M%SZ"))
}

fn cmd_run(cfg: &RunConfig, problem_file: &Path, run_id: Option<&str>) -> Result<i32, CliError> {
    let problem = std::fs::read_to_string(problem_file).map_err(|e| {
        CliError::Input(format!("cannot read problem file {}: {e}", problem_file.display()))
    })?;
    let base = run_id.map(str::to_string).unwrap_or_else(new_run_id);
    let mut run_id = base.clone();
    let mut n = 1;
    while cfg.output.dir.join(&run_id).exists() {
        n += 1;
        run_id = format!("{base}-{n}");
    }
    let run_dir = cfg.output.dir.join(&run_id);
    let state = execute_run(cfg, &problem, &run_dir, &run_id)?;
    println!("run directory: {}", run_dir.display());
    for a in &state.report.artifacts {
        println!("  {}", run_dir.join(a).display());
    }
    println!("{}", state.report.summary());
    Ok(state.exit_code())
}

/// Builds the team and tools from `cfg`, runs the workflow into `run_dir`,
/// and records what replay needs next to the other artifacts.
pub fn execute_run(
    cfg: &RunConfig,
    problem: &str,
    run_dir: &Path,
    run_id: &str,
) -> Result<RunState, CliError> {
    if problem.trim().is_empty() {
        return Err(OrchestratorError::EmptyProblem.into());
    }
    let kb = Arc::new(knowledge(cfg)?);
    let provider: Arc<dyn SearchProvider> = match cfg.search.mode {
        SearchMode::Fixture => Arc::new(match &cfg.search.fixture {
            Some(p) => FixtureSearch::load(p).map_err(|e| CliError::Input(e.to_string()))?,
            None => FixtureSearch::default(),
        }),
        SearchMode::Live => Arc::new(
            TavilySearch::new(
                cfg.search.url.as_deref(),
                &cfg.search.api_key_env,
                Duration::from_secs(cfg.backend.timeout_secs),
            )
            .map_err(|e| CliError::Input(e.to_string()))?,
        ),
    };
    let search = Arc::new(RecordingSearch::new(provider));
    let rag = default_store(cfg, &kb)?;
    let registry = build_registry(
        kb,
        search.clone(),
        cfg.search.k,
        Arc::new(RwLock::new(rag)),
        cfg.rag.k,
    );
    let team = load_team(cfg, &registry)?;
    let workflow = match &cfg.workflow.file {
        Some(p) => WorkflowDefinition::load(p)?,
        None => WorkflowDefinition::bundled(),
    };
    let inner: Box<dyn ChatBackend> = match cfg.backend.kind {
        BackendKind::Scripted => {
            let path = cfg.backend.script.as_ref().ok_or_else(|| {
                CliError::Input("the scripted backend needs --script or backend.script".into())
            })?;
            let script = Script::load(path).map_err(|e| CliError::Input(e.to_string()))?;
            Box::new(ScriptedBackend::new(script))
        }
        BackendKind::Live => Box::new(
            OpenAiBackend::new(cfg.backend_config()).map_err(|e: BackendError| CliError::Input(e.to_string()))?,
        ),
    };
    let backend = RecordingBackend::new(inner);
    let engine = Engine {
        backend: &backend,
        team: &team,
        registry: &registry,
        workflow: &workflow,
        limits: cfg.limits,
        settings: EngineSettings {
            model: cfg.backend.model.clone(),
            temperature: cfg.backend.temperature,
            max_output_tokens: cfg.backend.max_output_tokens,
            required_tools: cfg.team.required_tools.clone(),
        },
        clock: &SystemClock,
    };
    let sink = DirSink::new(run_dir);
    let mut state = engine.run_workflow(run_id, problem, &sink)?;

    let write = |name: &str, text: &str| {
        std::fs::write(run_dir.join(name), text)
            .map_err(|e| CliError::Orchestrator(OrchestratorError::Sink(e)))
    };
    write(RECORDED_SCRIPT_FILE, &backend.recorded().to_ndjson())?;
    write(SEARCH_TAPE_FILE, &search.tape().to_json())?;
    write(CONFIG_FILE, &cfg.absolutized().to_toml())?;
    for name in [RECORDED_SCRIPT_FILE, SEARCH_TAPE_FILE, CONFIG_FILE] {
        state.report.artifacts.push(name.to_string());
    }
    write(REPORT_FILE, &state.report.to_json())?;
    Ok(state)
}

fn load_team(cfg: &RunConfig, registry: &ToolRegistry) -> Result<Team, CliError> {
    let t = &cfg.team;
    let team = match &t.prompts_dir {
        Some(dir) => Team::load(dir, &t.roster, &t.supervisor, &t.documentation_agent, registry),
        None => {
            let parse = |name: &str| {
                let text = bundled_profile(name).ok_or_else(|| {
                    CliError::Input(format!("no bundled profile named {name}; set team.prompts_dir"))
                })?;
                AgentProfile::parse(&format!("prompts/{name}.md"), text, registry)
                    .map_err(|e| CliError::Input(e.to_string()))
            };
            let members = t.roster.iter().map(|n| parse(n)).collect::<Result<Vec<_>, _>>()?;
            Team::new(members, parse(&t.supervisor)?, &t.documentation_agent)
        }
    };
    team.map_err(|e| CliError::Input(e.to_string()))
}

fn cmd_replay(run_dir: &Path) -> Result<i32, CliError> {
    let transcript_path = run_dir.join(TRANSCRIPT_FILE);
    let script_path = run_dir.join(RECORDED_SCRIPT_FILE);
    for p in [&transcript_path, &script_path] {
        if !p.is_file() {
            return Err(CliError::Input(format!("{} is missing", p.display())));
        }
    }
    let recorded_log = std::fs::read_to_string(&transcript_path)
        .map_err(|e| CliError::Input(format!("{}: {e}", transcript_path.display())))?;
    let transcripts =
        parse_log(&recorded_log).map_err(|e| CliError::Input(format!("{TRANSCRIPT_FILE}: {e}")))?;
    let problem = transcripts
        .first()
        .and_then(|t| t.messages().first())
        .map(|m| m.content.clone())
        .ok_or_else(|| CliError::Input(format!("{TRANSCRIPT_FILE} holds no problem statement")))?;

    let config_path = run_dir.join(CONFIG_FILE);
    let mut cfg = if config_path.is_file() {
        RunConfig::load(&config_path)?
    } else {
        RunConfig::default()
    };
    cfg.backend.kind = BackendKind::Scripted;
    cfg.backend.script = Some(script_path);
    cfg.search.mode = SearchMode::Fixture;
    let tape = run_dir.join(SEARCH_TAPE_FILE);
    cfg.search.fixture = tape.is_file().then_some(tape);

    let report_path = run_dir.join(REPORT_FILE);
    let recorded_report: Option<RunReport> = std::fs::read_to_string(&report_path)
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok());
    let run_id = recorded_report
        .as_ref()
        .map(|r| r.run_id.clone())
        .unwrap_or_else(|| "replay".into());

    let scratch = tempfile::tempdir()
        .map_err(|e| CliError::Input(format!("cannot create scratch directory: {e}")))?;
    let replay_dir = scratch.path().join("replay");
    cfg.output.dir = scratch.path().to_path_buf();
    execute_run(&cfg, &problem, &replay_dir, &run_id)?;

    compare_exact(run_dir, &replay_dir, TRANSCRIPT_FILE)?;
    let mut docs: Vec<String> = Vec::new();
    for dir in [run_dir, replay_dir.as_path()] {
        for entry in std::fs::read_dir(dir).into_iter().flatten().flatten() {
            let name = entry.file_name().to_string_lossy().into_owned();
            let is_doc = name == FINAL_REPORT_FILE || (name.starts_with("step_") && name.ends_with(".md"));
            if is_doc && !docs.contains(&name) {
                docs.push(name);
            }
        }
    }
    docs.sort_by_key(|n| doc_order(n));
    for name in &docs {
        compare_texts(
            name,
            &read_masked(&run_dir.join(name)),
            &read_masked(&replay_dir.join(name)),
        )?;
    }
    let replayed_report: Option<RunReport> = std::fs::read_to_string(replay_dir.join(REPORT_FILE))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok());
    compare_texts(
        REPORT_FILE,
        &recorded_report.map(|r| r.masked_json()).unwrap_or_default(),
        &replayed_report.map(|r| r.masked_json()).unwrap_or_default(),
    )?;
    println!(
        "replay matches: {} documents, {} and {} reproduced",
        docs.len(),
        TRANSCRIPT_FILE,
        REPORT_FILE
    );
    Ok(EXIT_OK)
}

fn doc_order(name: &str) -> u32 {
    name.strip_prefix("step_")
        .and_then(|r| r.strip_suffix(".md"))
        .and_then(|n| n.parse().ok())
        .unwrap_or(u32::MAX)
}

fn read_masked(path: &Path) -> String {
    std::fs::read_to_string(path).map(|t| mask_timestamps(&t)).unwrap_or_default()
}

fn compare_exact(a: &Path, b: &Path, name: &str) -> Result<(), CliError> {
    let read = |d: &Path| std::fs::read_to_string(d.join(name)).unwrap_or_default();
    compare_texts(name, &read(a), &read(b))
}

/// First differing line, 1-based, reported as `file:line`.
fn compare_texts(name: &str, recorded: &str, replayed: &str) -> Result<(), CliError> {
    if recorded == replayed {
        return Ok(());
    }
    let (mut a, mut b) = (recorded.lines(), replayed.lines());
    let mut line = 1;
    loop {
        match (a.next(), b.next()) {
            (Some(x), Some(y)) if x == y => line += 1,
            (x, y) => {
                let show = |l: Option<&str>| match l {
                    Some(l) => truncate(l),
                    None => "<end of file>".to_string(),
                };
                return Err(CliError::Mismatch {
                    location: format!("{name}:{line}"),
                    recorded: show(x),
                    replayed: show(y),
                });
            }
        }
    }
}

fn truncate(line: &str) -> String {
    const MAX: usize = 160;
    if line.chars().count() <= MAX {
        line.to_string()
    } else {
        format!("{}...", line.chars().take(MAX).collect::<String>())
    }
}
