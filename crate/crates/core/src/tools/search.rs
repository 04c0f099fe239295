//! Web search: an offline fixture provider, a live HTTP provider, and a
//! recorder that turns any provider's answers into a fixture file.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Args, ParamKind, ParamSpec, Tool, ToolDescriptor, ToolError};

pub const DEFAULT_SEARCH_K: usize = 5;
pub const TAVILY_URL: &str = "https://api.tavily.com/search";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub url: String,
    pub content: String,
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("search query is empty")]
    EmptyQuery,
    #[error("no fixture results for query {0:?}")]
    MissFixture(String),
    #[error("search provider failed{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    ProviderFailure { status: Option<u16>, message: String },
    #[error("search API key environment variable {0} is not set")]
    AuthMissing(String),
    #[error("bad search fixture: {0}")]
    Fixture(String),
}

pub trait SearchProvider: Send + Sync {
    /// At most `k` results in provider order.
    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchResult>, SearchError>;
}

/// Lowercase, whitespace collapsed, trimmed.
pub fn normalize_query(q: &str) -> String {
    q.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Canned results keyed by normalized query. The file is a JSON object
/// mapping query text to a list of `{url, content}` records.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FixtureSearch {
    entries: BTreeMap<String, Vec<SearchResult>>,
}

impl FixtureSearch {
    pub fn new(entries: BTreeMap<String, Vec<SearchResult>>) -> Self {
        Self {
            entries: entries
                .into_iter()
                .map(|(k, v)| (normalize_query(&k), v))
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SearchError> {
        let raw: BTreeMap<String, Vec<SearchResult>> =
            serde_json::from_str(text).map_err(|e| SearchError::Fixture(e.to_string()))?;
        Ok(Self::new(raw))
    }

    pub fn load(path: &Path) -> Result<Self, SearchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SearchError::Fixture(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("fixture serializes") + "\n"
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl SearchProvider for FixtureSearch {
    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchResult>, SearchError> {
        let key = normalize_query(query);
        if key.is_empty() {
            return Err(SearchError::EmptyQuery);
        }
        let hits = self
            .entries
            .get(&key)
            .ok_or_else(|| SearchError::MissFixture(key.clone()))?;
        Ok(hits.iter().take(k).cloned().collect())
    }
}

/// Live search against the Tavily HTTP API.
pub struct TavilySearch {
    url: String,
    api_key: String,
    http: reqwest::blocking::Client,
}

impl TavilySearch {
    pub fn new(url: Option<&str>, api_key_env: &str, timeout: Duration) -> Result<Self, SearchError> {
        let api_key = std::env::var(api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| SearchError::AuthMissing(api_key_env.to_string()))?;
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| SearchError::ProviderFailure {
                status: None,
                message: e.to_string(),
            })?;
        Ok(Self {
            url: url.unwrap_or(TAVILY_URL).to_string(),
            api_key,
            http,
        })
    }
}

#[derive(Deserialize)]
struct TavilyResponse {
    results: Vec<SearchResult>,
}

impl SearchProvider for TavilySearch {
    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchResult>, SearchError> {
        if query.trim().is_empty() {
            return Err(SearchError::EmptyQuery);
        }
        let failure = |status: Option<u16>, message: String| SearchError::ProviderFailure { status, message };
        let resp = self
            .http
            .post(&self.url)
            .bearer_auth(&self.api_key)
            .json(&serde_json::json!({"query": query, "max_results": k}))
            .send()
            .map_err(|e| failure(None, e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| failure(None, e.to_string()))?;
        if !status.is_success() {
            return Err(failure(Some(status.as_u16()), text.chars().take(300).collect()));
        }
        let parsed: TavilyResponse =
            serde_json::from_str(&text).map_err(|e| failure(None, format!("bad body: {e}")))?;
        Ok(parsed.results.into_iter().take(k).collect())
    }
}

/// Remembers every answered query so a run can be replayed offline.
pub struct RecordingSearch {
    inner: Arc<dyn SearchProvider>,
    tape: Mutex<BTreeMap<String, Vec<SearchResult>>>,
}

impl RecordingSearch {
    pub fn new(inner: Arc<dyn SearchProvider>) -> Self {
        Self {
            inner,
            tape: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn tape(&self) -> FixtureSearch {
        FixtureSearch::new(self.tape.lock().expect("tape lock").clone())
    }
}

impl SearchProvider for RecordingSearch {
    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchResult>, SearchError> {
        let results = self.inner.search(query, k)?;
        self.tape
            .lock()
            .expect("tape lock")
            .insert(normalize_query(query), results.clone());
        Ok(results)
    }
}

pub struct WebSearchTool {
    provider: Arc<dyn SearchProvider>,
    default_k: usize,
    descriptor: ToolDescriptor,
}

impl WebSearchTool {
    pub fn new(provider: Arc<dyn SearchProvider>, default_k: usize) -> Self {
        Self {
            provider,
            default_k: default_k.max(1),
            descriptor: ToolDescriptor {
                name: super::WEB_SEARCH.into(),
                description: "Search the web. Returns a list of results with url and content."
                    .into(),
                parameters: vec![
                    ParamSpec::new("query", ParamKind::String, "Search query", true),
                    ParamSpec::new("k", ParamKind::Integer, "Maximum number of results", false),
                ],
            },
        }
    }
}

impl Tool for WebSearchTool {
    fn descriptor(&self) -> &ToolDescriptor {
        &self.descriptor
    }

    fn call(&self, args: &Args) -> Result<String, ToolError> {
        let query = args.str("query")?;
        let k = match args.opt_uint("k")? {
            Some(0) => return Err(ToolError::field("k", "must be at least 1")),
            Some(k) => k as usize,
            None => self.default_k,
        };
        let results = self.provider.search(query, k).map_err(|e| match e {
            SearchError::EmptyQuery => ToolError::field("query", "must not be empty"),
            other => ToolError::Failed(other.to_string()),
        })?;
        Ok(serde_json::to_string(&results).expect("results serialize"))
    }
}
