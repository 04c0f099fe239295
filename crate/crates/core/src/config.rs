//! Run configuration: a TOML file, overridden by command-line values.
//!
//! ```toml
//! [backend]
//! kind = "scripted"
//! script = "fixtures/full_run.script"
//!
//! [limits]
//! max_node_calls_per_step = 25
//! ```
//!
//! Every key is listed in [`CONFIG_KEYS`]; `--set key=value` accepts the
//! same dotted names.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::DEFAULT_ROSTER;
use crate::llm::{
    BackendConfig, BackendKind, DEFAULT_API_KEY_ENV, DEFAULT_BASE_URL, DEFAULT_MAX_RETRIES,
    DEFAULT_MODEL, DEFAULT_TEMPERATURE,
};
use crate::orchestrator::Limits;
use crate::tools::{RagConfig, DEFAULT_RAG_K, DEFAULT_SEARCH_K};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("config: {0}")]
    Parse(String),
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("override {0:?} must look like key=value")]
    BadOverride(String),
    #[error("config: {0}")]
    Invalid(String),
}

/// Every accepted key with a one-line description, in file order.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("backend.kind", "model backend: live | scripted"),
    ("backend.base_url", "OpenAI-compatible API root"),
    ("backend.api_key_env", "environment variable holding the API key"),
    ("backend.model", "model name"),
    ("backend.temperature", "sampling temperature, 0 to 2"),
    ("backend.timeout_secs", "per-request timeout in seconds"),
    ("backend.max_retries", "retries for transient (5xx, network) failures"),
    ("backend.retry_backoff_ms", "first retry delay in ms, doubled per retry"),
    ("backend.max_output_tokens", "completion token cap per call (unset: provider default)"),
    ("backend.script", "script file for the scripted backend"),
    ("limits.max_node_calls_per_step", "node calls allowed per step, one reserved for documentation"),
    ("limits.max_tool_rounds_per_turn", "tool rounds per agent turn before tools are disabled"),
    ("limits.max_router_retries", "supervisor re-asks after an unparseable reply"),
    ("limits.max_total_tokens", "run-wide token budget (unset: unlimited)"),
    ("team.prompts_dir", "directory of agent profile files (unset: bundled)"),
    ("team.roster", "worker names in routing order"),
    ("team.supervisor", "supervisor profile name"),
    ("team.documentation_agent", "worker that writes step documents"),
    ("team.required_tools", "agents whose first request must call a tool"),
    ("workflow.file", "workflow definition TOML (unset: bundled six steps)"),
    ("search.mode", "web search provider: fixture | live"),
    ("search.fixture", "JSON file of canned search results"),
    ("search.k", "default number of search results"),
    ("search.api_key_env", "environment variable holding the search API key"),
    ("search.url", "live search endpoint (unset: provider default)"),
    ("rag.corpus_dir", "extra .md/.txt documents for retrieval"),
    ("rag.chunk_size", "chunk length in characters"),
    ("rag.overlap", "overlap between chunks in characters"),
    ("rag.k", "default number of retrieved chunks"),
    ("output.dir", "root directory for run artifacts"),
    ("knowledge.data_dir", "directory with parameters.tsv, principles.tsv, matrix.txt (unset: bundled)"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    pub kind: BackendKind,
    pub base_url: String,
    pub api_key_env: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_output_tokens: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub script: Option<PathBuf>,
}

impl Default for BackendSection {
    fn default() -> Self {
        Self {
            kind: BackendKind::Live,
            base_url: DEFAULT_BASE_URL.into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            model: DEFAULT_MODEL.into(),
            temperature: DEFAULT_TEMPERATURE,
            timeout_secs: 60,
            max_retries: DEFAULT_MAX_RETRIES,
            retry_backoff_ms: 500,
            max_output_tokens: None,
            script: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeamSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompts_dir: Option<PathBuf>,
    pub roster: Vec<String>,
    pub supervisor: String,
    pub documentation_agent: String,
    pub required_tools: Vec<String>,
}

impl Default for TeamSection {
    fn default() -> Self {
        Self {
            prompts_dir: None,
            roster: DEFAULT_ROSTER.iter().map(|s| s.to_string()).collect(),
            supervisor: crate::agents::SUPERVISOR.into(),
            documentation_agent: crate::agents::DOCUMENTATION_AGENT.into(),
            required_tools: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkflowSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    #[default]
    Fixture,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub mode: SearchMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture: Option<PathBuf>,
    pub k: usize,
    pub api_key_env: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self {
            mode: SearchMode::Fixture,
            fixture: None,
            k: DEFAULT_SEARCH_K,
            api_key_env: "TAVILY_API_KEY".into(),
            url: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RagSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus_dir: Option<PathBuf>,
    pub chunk_size: usize,
    pub overlap: usize,
    pub k: usize,
}

impl Default for RagSection {
    fn default() -> Self {
        let c = RagConfig::default();
        Self {
            corpus_dir: None,
            chunk_size: c.chunk_size,
            overlap: c.overlap,
            k: DEFAULT_RAG_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("runs") }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnowledgeSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendSection,
    pub limits: Limits,
    pub team: TeamSection,
    pub workflow: WorkflowSection,
    pub search: SearchSection,
    pub rag: RagSection,
    pub output: OutputSection,
    pub knowledge: KnowledgeSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies one `key=value` override. The value is read as a TOML value
    /// when it parses as one and as a plain string otherwise.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::BadOverride(assignment.to_string()))?;
        let key = key.trim();
        if !CONFIG_KEYS.iter().any(|(k, _)| *k == key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        let raw = raw.trim();
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut tree = toml::Value::try_from(&*self).expect("config serializes");
        let (section, field) = key.split_once('.').expect("keys are dotted");
        tree.as_table_mut()
            .and_then(|t| t.get_mut(section))
            .and_then(|s| s.as_table_mut())
            .expect("every section serializes")
            .insert(field.to_string(), value);
        let updated: Self = tree
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Invalid(format!("{key}: {}", e.message())))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let b = &self.backend;
        if !(0.0..=2.0).contains(&b.temperature) {
            return Err(ConfigError::Invalid(format!(
                "backend.temperature {} outside [0, 2]",
                b.temperature
            )));
        }
        if b.timeout_secs == 0 {
            return Err(ConfigError::Invalid("backend.timeout_secs must be positive".into()));
        }
        self.limits
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.rag.overlap >= self.rag.chunk_size {
            return Err(ConfigError::Invalid(format!(
                "rag.overlap {} must be smaller than rag.chunk_size {}",
                self.rag.overlap, self.rag.chunk_size
            )));
        }
        if self.rag.k == 0 || self.search.k == 0 {
            return Err(ConfigError::Invalid("rag.k and search.k must be positive".into()));
        }
        if self.team.roster.is_empty() {
            return Err(ConfigError::Invalid("team.roster is empty".into()));
        }
        Ok(())
    }

    pub fn backend_config(&self) -> BackendConfig {
        let b = &self.backend;
        BackendConfig {
            kind: b.kind,
            base_url: b.base_url.clone(),
            api_key_env: b.api_key_env.clone(),
            model: b.model.clone(),
            temperature: b.temperature,
            timeout: Duration::from_secs(b.timeout_secs),
            max_retries: b.max_retries,
            retry_backoff: Duration::from_millis(b.retry_backoff_ms),
            max_output_tokens: b.max_output_tokens,
        }
    }

    pub fn rag_config(&self) -> RagConfig {
        RagConfig {
            chunk_size: self.rag.chunk_size,
            overlap: self.rag.overlap,
        }
    }

    /// Copy with every configured path made absolute, so the config still
    /// resolves when read from another working directory.
    pub fn absolutized(&self) -> Self {
        let abs = |p: &Option<PathBuf>| p.as_ref().map(|p| std::path::absolute(p).unwrap_or_else(|_| p.clone()));
        let mut c = self.clone();
        c.backend.script = abs(&c.backend.script);
        c.team.prompts_dir = abs(&c.team.prompts_dir);
        c.workflow.file = abs(&c.workflow.file);
        c.search.fixture = abs(&c.search.fixture);
        c.rag.corpus_dir = abs(&c.rag.corpus_dir);
        c.knowledge.data_dir = abs(&c.knowledge.data_dir);
        c.output.dir = std::path::absolute(&c.output.dir).unwrap_or(c.output.dir);
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
        assert_eq!(c.limits, Limits::default());
        assert_eq!(c.backend.model, "gpt-4o");
        assert_eq!(c.backend.temperature, 0.5);
    }

    #[test]
    fn overrides() {
        let mut c = RunConfig::default();
        c.set("limits.max_node_calls_per_step=30").unwrap();
        c.set("backend.kind=scripted").unwrap();
        c.set("limits.max_total_tokens = 250000").unwrap();
        c.set("output.dir=out/runs").unwrap();
        assert_eq!(c.limits.max_node_calls_per_step, 30);
        assert_eq!(c.backend.kind, BackendKind::Scripted);
        assert_eq!(c.limits.max_total_tokens, Some(250_000));
        assert_eq!(c.output.dir, PathBuf::from("out/runs"));
        assert!(matches!(c.set("limits.nope=1"), Err(ConfigError::UnknownKey(_))));
        assert!(c.set("limits.max_node_calls_per_step=1").is_err());
        assert!(c.set("backend.temperature=3").is_err());
        assert_eq!(c.limits.max_node_calls_per_step, 30);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(RunConfig::parse("[backend]\nmodle = \"x\"\n").is_err());
        assert!(RunConfig::parse("[bogus]\n").is_err());
    }

    #[test]
    fn key_table_matches_schema() {
        let tree = toml::Value::try_from(RunConfig {
            backend: BackendSection {
                max_output_tokens: Some(1),
                script: Some("s".into()),
                ..Default::default()
            },
            limits: Limits { max_total_tokens: Some(1), ..Default::default() },
            team: TeamSection { prompts_dir: Some("p".into()), ..Default::default() },
            workflow: WorkflowSection { file: Some("w".into()) },
            search: SearchSection {
                fixture: Some("f".into()),
                url: Some("u".into()),
                ..Default::default()
            },
            rag: RagSection { corpus_dir: Some("c".into()), ..Default::default() },
            output: OutputSection::default(),
            knowledge: KnowledgeSection { data_dir: Some("d".into()) },
        })
        .unwrap();
        let mut keys = Vec::new();
        for (section, fields) in tree.as_table().unwrap() {
            for field in fields.as_table().unwrap().keys() {
                keys.push(format!("{section}.{field}"));
            }
        }
        keys.sort();
        let mut documented: Vec<String> = CONFIG_KEYS.iter().map(|(k, _)| k.to_string()).collect();
        documented.sort();
        assert_eq!(keys, documented);
    }
}
