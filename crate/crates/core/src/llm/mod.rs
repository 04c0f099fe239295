//! Chat-completion contract shared by the live client and the scripted
//! backend.

mod openai;
mod recording;
mod scripted;
mod usage;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conversation::{Message, ToolCall};

pub use openai::{parse_chat_response, request_body, OpenAiBackend};
pub use recording::RecordingBackend;
pub use scripted::{Script, ScriptEntry, ScriptError, ScriptKey, ScriptedBackend};
pub use usage::{TokenUsage, UsageLedger};

pub const DEFAULT_MODEL: &str = "gpt-4o";
pub const DEFAULT_TEMPERATURE: f64 = 0.5;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);
pub const DEFAULT_MAX_RETRIES: u32 = 3;
pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

/// Function-style tool definition as sent on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    /// JSON schema of the arguments object.
    pub parameters: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolChoice {
    #[default]
    Auto,
    None,
    Required,
}

/// Who is asking; drives script lookups and accounting, never sent on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CallMeta {
    pub agent: String,
    pub step: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub tools: Vec<ToolSpec>,
    pub tool_choice: ToolChoice,
    pub temperature: f64,
    pub max_output_tokens: Option<u32>,
    pub meta: CallMeta,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, messages: Vec<Message>, meta: CallMeta) -> Self {
        Self {
            model: model.into(),
            messages,
            tools: Vec::new(),
            tool_choice: ToolChoice::Auto,
            temperature: DEFAULT_TEMPERATURE,
            max_output_tokens: None,
            meta,
        }
    }

    /// Request-side preconditions shared by every backend.
    pub fn check(&self) -> Result<(), BackendError> {
        if self.messages.is_empty() {
            return Err(BackendError::InvalidRequest("no messages".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        let mut calls = std::collections::HashSet::new();
        for m in &self.messages {
            calls.extend(m.tool_calls.iter().map(|c| c.id.as_str()));
            if let Some(id) = &m.tool_call_id {
                if !calls.contains(id.as_str()) {
                    return Err(BackendError::InvalidRequest(format!(
                        "tool message {id:?} has no preceding tool call"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    ToolCalls,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: Option<String>,
    pub tool_calls: Vec<ToolCall>,
    pub usage: TokenUsage,
    pub finish_reason: FinishReason,
}

impl ChatResponse {
    pub fn text(content: impl Into<String>, usage: TokenUsage) -> Self {
        Self {
            content: Some(content.into()),
            tool_calls: Vec::new(),
            usage,
            finish_reason: FinishReason::Stop,
        }
    }

    pub fn calls(tool_calls: Vec<ToolCall>, usage: TokenUsage) -> Self {
        Self {
            content: None,
            tool_calls,
            usage,
            finish_reason: FinishReason::ToolCalls,
        }
    }

    /// finish_reason = tool_calls exactly when tool calls are present.
    pub fn is_consistent(&self) -> bool {
        (self.finish_reason == FinishReason::ToolCalls) == !self.tool_calls.is_empty()
            && self.usage.is_consistent()
    }

    pub fn content_text(&self) -> &str {
        self.content.as_deref().unwrap_or("")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Scripted,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Live => "live",
            BackendKind::Scripted => "scripted",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub base_url: String,
    pub api_key_env: String,
    pub model: String,
    pub temperature: f64,
    pub timeout: Duration,
    pub max_retries: u32,
    /// First retry delay; doubles on every further attempt.
    pub retry_backoff: Duration,
    pub max_output_tokens: Option<u32>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Scripted,
            base_url: DEFAULT_BASE_URL.to_string(),
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            model: DEFAULT_MODEL.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            timeout: DEFAULT_TIMEOUT,
            max_retries: DEFAULT_MAX_RETRIES,
            retry_backoff: Duration::from_millis(500),
            max_output_tokens: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport error{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Transport { status: Option<u16>, message: String },
    #[error("API key environment variable {0} is not set")]
    AuthMissing(String),
    #[error("request timed out")]
    Timeout,
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("script exhausted, no entry for {0}")]
    ScriptExhausted(ScriptKey),
    #[error("script expected {expected} but the run asked for {got}")]
    KeyMismatch { expected: ScriptKey, got: ScriptKey },
}

impl BackendError {
    /// Transient failures worth another attempt. Client errors never are.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport { status: Some(s), .. } => *s >= 500,
            BackendError::Transport { status: None, .. } | BackendError::Timeout => true,
            _ => false,
        }
    }
}

/// A chat model. Implementations are shareable across threads; each run
/// issues its requests strictly one after another.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for &T {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).complete(req)
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for Box<T> {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).complete(req)
    }
}
