//! Tool registry and in-band dispatch.
//!
//! Failures never escape [`ToolRegistry::dispatch`]: unknown tools, bad
//! arguments and provider errors all come back as `ok = false` results whose
//! content tells the agent what went wrong.

mod rag;
mod search;
mod triz;

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use serde_json::{json, Map, Value};
use thiserror::Error;

pub use crate::conversation::ToolCall;
use crate::knowledge::KnowledgeBase;
use crate::llm::ToolSpec;
pub use rag::{
    bm25_scores, chunk_spans, tokenize, IngestStats, RagAnswer, RagChunk, RagConfig, RagError,
    RagStore, RagTool, BM25_B, BM25_K1, DEFAULT_RAG_K,
};
pub use search::{
    normalize_query, FixtureSearch, RecordingSearch, SearchError, SearchProvider, SearchResult,
    TavilySearch, WebSearchTool, DEFAULT_SEARCH_K,
};
pub use triz::{
    render_principle_ids, ContradictionMatrixTool, InventivePrinciplesTool, TrizFeaturesTool,
    NO_PRINCIPLES_MESSAGE,
};

pub const WEB_SEARCH: &str = "web_search";
pub const TRIZ_FEATURES: &str = "triz_features_tool";
pub const CONTRADICTION_MATRIX: &str = "contradiction_matrix_tool";
pub const INVENTIVE_PRINCIPLES: &str = "inventive_principles_tool";
pub const TRIZ_RAG: &str = "triz_rag_tool";

/// The four tools only the TRIZ specialist carries.
pub const TRIZ_TOOLS: [&str; 4] = [TRIZ_FEATURES, CONTRADICTION_MATRIX, INVENTIVE_PRINCIPLES, TRIZ_RAG];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    String,
    Integer,
    /// A parameter id or its canonical name.
    IntegerOrString,
    IntegerArray,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub description: String,
    pub required: bool,
}

impl ParamSpec {
    pub fn new(name: &str, kind: ParamKind, description: &str, required: bool) -> Self {
        Self {
            name: name.into(),
            kind,
            description: description.into(),
            required,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolDescriptor {
    pub name: String,
    pub description: String,
    pub parameters: Vec<ParamSpec>,
}

impl ToolDescriptor {
    pub fn json_schema(&self) -> Value {
        let mut properties = Map::new();
        for p in &self.parameters {
            let schema = match p.kind {
                ParamKind::String => json!({"type": "string", "description": p.description}),
                ParamKind::Integer => json!({"type": "integer", "description": p.description}),
                ParamKind::IntegerOrString => json!({
                    "type": ["integer", "string"],
                    "description": p.description,
                }),
                ParamKind::IntegerArray => json!({
                    "type": "array",
                    "items": {"type": "integer"},
                    "description": p.description,
                }),
            };
            properties.insert(p.name.clone(), schema);
        }
        let required: Vec<&str> = self
            .parameters
            .iter()
            .filter(|p| p.required)
            .map(|p| p.name.as_str())
            .collect();
        json!({"type": "object", "properties": properties, "required": required})
    }

    pub fn to_spec(&self) -> ToolSpec {
        ToolSpec {
            name: self.name.clone(),
            description: self.description.clone(),
            parameters: self.json_schema(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolResult {
    pub call_id: String,
    pub tool_name: String,
    pub content: String,
    pub ok: bool,
    pub diagnostics: Option<String>,
}

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("field `{field}`: {reason}")]
    BadArguments { field: String, reason: String },
    #[error("{0}")]
    Failed(String),
}

impl ToolError {
    pub fn field(field: &str, reason: impl Into<String>) -> Self {
        ToolError::BadArguments {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Parsed tool arguments with typed accessors whose errors name the field.
pub struct Args(Map<String, Value>);

impl Args {
    pub fn parse(raw: &str) -> Result<Self, ToolError> {
        let raw = if raw.trim().is_empty() { "{}" } else { raw };
        match serde_json::from_str::<Value>(raw) {
            Ok(Value::Object(map)) => Ok(Self(map)),
            Ok(_) => Err(ToolError::field("arguments", "expected a JSON object")),
            Err(e) => Err(ToolError::field("arguments", format!("not valid JSON ({e})"))),
        }
    }

    pub fn get(&self, field: &str) -> Option<&Value> {
        self.0.get(field).filter(|v| !v.is_null())
    }

    pub fn str(&self, field: &str) -> Result<&str, ToolError> {
        match self.get(field) {
            Some(Value::String(s)) => Ok(s),
            Some(_) => Err(ToolError::field(field, "expected a string")),
            None => Err(ToolError::field(field, "missing")),
        }
    }

    pub fn opt_uint(&self, field: &str) -> Result<Option<u64>, ToolError> {
        match self.get(field) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| ToolError::field(field, "expected a non-negative integer")),
        }
    }

    pub fn uint_list(&self, field: &str) -> Result<Vec<u32>, ToolError> {
        let items = match self.get(field) {
            Some(Value::Array(items)) => items,
            Some(_) => return Err(ToolError::field(field, "expected an array of integers")),
            None => return Err(ToolError::field(field, "missing")),
        };
        items
            .iter()
            .map(|v| {
                v.as_u64()
                    .and_then(|n| u32::try_from(n).ok())
                    .ok_or_else(|| ToolError::field(field, format!("{v} is not a non-negative integer")))
            })
            .collect()
    }

    /// An integer id or a name, returned as text for later resolution.
    pub fn id_or_name(&self, field: &str) -> Result<String, ToolError> {
        match self.get(field) {
            Some(Value::Number(n)) if n.is_u64() => Ok(n.to_string()),
            Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.clone()),
            Some(_) => Err(ToolError::field(field, "expected a parameter id or name")),
            None => Err(ToolError::field(field, "missing")),
        }
    }
}

pub trait Tool: Send + Sync {
    fn descriptor(&self) -> &ToolDescriptor;
    /// Returns the text handed back to the model.
    fn call(&self, args: &Args) -> Result<String, ToolError>;
}

#[derive(Clone, Default)]
pub struct ToolRegistry {
    tools: BTreeMap<String, Arc<dyn Tool>>,
}

impl std::fmt::Debug for ToolRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.tools.keys()).finish()
    }
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, tool: Arc<dyn Tool>) {
        self.tools.insert(tool.descriptor().name.clone(), tool);
    }

    pub fn descriptor(&self, name: &str) -> Option<&ToolDescriptor> {
        self.tools.get(name).map(|t| t.descriptor())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tools.keys().map(String::as_str)
    }

    /// Runs `call` if its tool is in `allowed`; every outcome is a result.
    pub fn dispatch(&self, allowed: &[ToolDescriptor], call: &ToolCall) -> ToolResult {
        let fail = |content: String| ToolResult {
            call_id: call.id.clone(),
            tool_name: call.name.clone(),
            diagnostics: Some(content.clone()),
            content,
            ok: false,
        };
        let tool = match self.tools.get(&call.name) {
            Some(t) if allowed.iter().any(|d| d.name == call.name) => t,
            _ => return fail(format!("Error: unknown tool `{}` for this agent", call.name)),
        };
        let outcome = Args::parse(&call.arguments).and_then(|args| {
            check_required(tool.descriptor(), &args)?;
            tool.call(&args)
        });
        match outcome {
            Ok(content) => ToolResult {
                call_id: call.id.clone(),
                tool_name: call.name.clone(),
                content: if content.is_empty() { "(no output)".into() } else { content },
                ok: true,
                diagnostics: None,
            },
            Err(e) => fail(format!("Error: {e}")),
        }
    }
}

/// Registry holding web search, retrieval and the TRIZ tools.
pub fn build_registry(
    kb: Arc<KnowledgeBase>,
    search: Arc<dyn SearchProvider>,
    search_k: usize,
    rag: Arc<RwLock<RagStore>>,
    rag_k: usize,
) -> ToolRegistry {
    let mut r = ToolRegistry::new();
    r.register(Arc::new(WebSearchTool::new(search, search_k)));
    r.register(Arc::new(TrizFeaturesTool::new(kb.clone())));
    r.register(Arc::new(ContradictionMatrixTool::new(kb.clone())));
    r.register(Arc::new(InventivePrinciplesTool::new(kb)));
    r.register(Arc::new(RagTool::new(rag, rag_k)));
    r
}

#[cfg(test)]
pub(crate) fn test_registry() -> ToolRegistry {
    let kb = Arc::new(KnowledgeBase::bundled());
    let rag = RagStore::seeded(&kb, RagConfig::default()).expect("seeded store");
    build_registry(kb, Arc::new(FixtureSearch::default()), DEFAULT_SEARCH_K, Arc::new(RwLock::new(rag)), DEFAULT_RAG_K)
}

fn check_required(d: &ToolDescriptor, args: &Args) -> Result<(), ToolError> {
    match d.parameters.iter().find(|p| p.required && args.get(&p.name).is_none()) {
        Some(p) => Err(ToolError::field(&p.name, "missing")),
        None => Ok(()),
    }
}
