//! Blocking client for OpenAI-compatible `/chat/completions` endpoints.

use std::thread;
use std::time::Duration;

use serde_json::{json, Map, Value};

use super::{
    BackendConfig, BackendError, ChatBackend, ChatRequest, ChatResponse, FinishReason,
    TokenUsage, ToolChoice,
};
use crate::conversation::{Message, Role, ToolCall, USER_SENDER};

pub struct OpenAiBackend {
    config: BackendConfig,
    api_key: String,
    http: reqwest::blocking::Client,
}

impl std::fmt::Debug for OpenAiBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OpenAiBackend")
            .field("base_url", &self.config.base_url)
            .field("model", &self.config.model)
            .finish_non_exhaustive()
    }
}

impl OpenAiBackend {
    /// Reads the API key from the configured environment variable. Fails
    /// with [`BackendError::AuthMissing`] before any network traffic.
    pub fn new(config: BackendConfig) -> Result<Self, BackendError> {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| BackendError::AuthMissing(config.api_key_env.clone()))?;
        Self::with_api_key(config, api_key)
    }

    pub fn with_api_key(config: BackendConfig, api_key: String) -> Result<Self, BackendError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Transport {
                status: None,
                message: e.to_string(),
            })?;
        Ok(Self {
            config,
            api_key,
            http,
        })
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn send_once(&self, body: &Value) -> Result<ChatResponse, BackendError> {
        let resp = self
            .http
            .post(self.endpoint())
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(map_reqwest)?;
        let status = resp.status();
        let text = resp.text().map_err(map_reqwest)?;
        if !status.is_success() {
            let mut message = text;
            message.truncate(500);
            return Err(BackendError::Transport {
                status: Some(status.as_u16()),
                message,
            });
        }
        parse_chat_response(&text)
    }
}

fn map_reqwest(e: reqwest::Error) -> BackendError {
    if e.is_timeout() {
        BackendError::Timeout
    } else {
        BackendError::Transport {
            status: e.status().map(|s| s.as_u16()),
            message: e.to_string(),
        }
    }
}

impl ChatBackend for OpenAiBackend {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        req.check()?;
        let body = request_body(req);
        let mut attempt = 0;
        loop {
            match self.send_once(&body) {
                Ok(r) => return Ok(r),
                Err(e) if e.is_retryable() && attempt < self.config.max_retries => {
                    let delay = self.config.retry_backoff * 2u32.saturating_pow(attempt);
                    tracing::warn!(error = %e, attempt, ?delay, "retrying chat completion");
                    thread::sleep(delay.min(Duration::from_secs(60)));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Wire names accept `[A-Za-z0-9_-]{1,64}`.
fn wire_name(sender: &str) -> Option<String> {
    let name: String = sender
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .take(64)
        .collect();
    (!name.is_empty()).then_some(name)
}

fn wire_message(m: &Message) -> Value {
    let mut obj = Map::new();
    match m.role {
        Role::System => {
            obj.insert("role".into(), json!("system"));
            obj.insert("content".into(), json!(m.content));
        }
        Role::Human => {
            obj.insert("role".into(), json!("user"));
            obj.insert("content".into(), json!(m.content));
            if m.sender != USER_SENDER {
                if let Some(n) = wire_name(&m.sender) {
                    obj.insert("name".into(), json!(n));
                }
            }
        }
        Role::Ai => {
            obj.insert("role".into(), json!("assistant"));
            obj.insert(
                "content".into(),
                if m.content.is_empty() { Value::Null } else { json!(m.content) },
            );
            if let Some(n) = wire_name(&m.sender) {
                obj.insert("name".into(), json!(n));
            }
            if !m.tool_calls.is_empty() {
                let calls: Vec<Value> = m
                    .tool_calls
                    .iter()
                    .map(|c| {
                        json!({
                            "id": c.id,
                            "type": "function",
                            "function": {"name": c.name, "arguments": c.arguments},
                        })
                    })
                    .collect();
                obj.insert("tool_calls".into(), Value::Array(calls));
            }
        }
        Role::Tool => {
            obj.insert("role".into(), json!("tool"));
            obj.insert("tool_call_id".into(), json!(m.tool_call_id));
            obj.insert("content".into(), json!(m.content));
        }
    }
    Value::Object(obj)
}

/// JSON body for a chat-completions POST. Tools are omitted when the
/// request disables tool use.
pub fn request_body(req: &ChatRequest) -> Value {
    let mut body = Map::new();
    body.insert("model".into(), json!(req.model));
    body.insert(
        "messages".into(),
        Value::Array(req.messages.iter().map(wire_message).collect()),
    );
    body.insert("temperature".into(), json!(req.temperature));
    if !req.tools.is_empty() && req.tool_choice != ToolChoice::None {
        let tools: Vec<Value> = req
            .tools
            .iter()
            .map(|t| {
                json!({
                    "type": "function",
                    "function": {
                        "name": t.name,
                        "description": t.description,
                        "parameters": t.parameters,
                    },
                })
            })
            .collect();
        body.insert("tools".into(), Value::Array(tools));
        body.insert("tool_choice".into(), json!(req.tool_choice));
    }
    if let Some(max) = req.max_output_tokens {
        body.insert("max_tokens".into(), json!(max));
    }
    Value::Object(body)
}

/// Parses a chat-completions response body.
pub fn parse_chat_response(text: &str) -> Result<ChatResponse, BackendError> {
    let bad = |why: &str| BackendError::MalformedResponse(why.to_string());
    let v: Value = serde_json::from_str(text).map_err(|e| bad(&format!("not JSON: {e}")))?;
    let choice = v
        .get("choices")
        .and_then(Value::as_array)
        .and_then(|c| c.first())
        .ok_or_else(|| bad("no choices"))?;
    let message = choice.get("message").ok_or_else(|| bad("choice without message"))?;
    let content = match message.get("content") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(bad("content is not a string")),
    };
    let mut tool_calls = Vec::new();
    if let Some(calls) = message.get("tool_calls").filter(|c| !c.is_null()) {
        for call in calls.as_array().ok_or_else(|| bad("tool_calls is not an array"))? {
            let id = call.get("id").and_then(Value::as_str).ok_or_else(|| bad("tool call without id"))?;
            let function = call.get("function").ok_or_else(|| bad("tool call without function"))?;
            let name = function
                .get("name")
                .and_then(Value::as_str)
                .ok_or_else(|| bad("tool call without name"))?;
            let arguments = function
                .get("arguments")
                .and_then(Value::as_str)
                .unwrap_or("{}");
            tool_calls.push(ToolCall::new(id, name, arguments));
        }
    }
    let usage = match v.get("usage").filter(|u| !u.is_null()) {
        None => TokenUsage::ZERO,
        Some(u) => {
            let field = |k: &str| u.get(k).and_then(Value::as_u64).unwrap_or(0);
            let usage = TokenUsage::new(field("prompt_tokens"), field("completion_tokens"));
            if u.get("total_tokens").and_then(Value::as_u64).is_some_and(|t| t != usage.total_tokens) {
                tracing::warn!("provider total_tokens differs from prompt + completion; using the sum");
            }
            usage
        }
    };
    let finish_reason = if !tool_calls.is_empty() {
        FinishReason::ToolCalls
    } else {
        match choice.get("finish_reason").and_then(Value::as_str) {
            Some("tool_calls") | Some("function_call") => {
                return Err(bad("finish_reason tool_calls without tool calls"))
            }
            Some("length") => FinishReason::Length,
            Some("stop") | None => FinishReason::Stop,
            Some(_) => FinishReason::Error,
        }
    };
    if content.is_none() && tool_calls.is_empty() && finish_reason == FinishReason::Stop {
        return Err(bad("response has neither content nor tool calls"));
    }
    Ok(ChatResponse {
        content,
        tool_calls,
        usage,
        finish_reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{CallMeta, ToolSpec};

    #[test]
    fn auth_missing_before_io() {
        let cfg = BackendConfig {
            api_key_env: "TRIZ_AGENTS_UNIT_TEST_NO_SUCH_KEY".into(),
            base_url: "http://127.0.0.1:9".into(),
            ..BackendConfig::default()
        };
        assert!(matches!(OpenAiBackend::new(cfg), Err(BackendError::AuthMissing(_))));
    }

    #[test]
    fn body_shape() {
        let mut req = ChatRequest::new(
            "gpt-4o",
            vec![
                Message::system("s"),
                Message::human("user", "u"),
                Message::human("SafetyEngineer", "[SafetyEngineer]: x"),
            ],
            CallMeta::default(),
        );
        req.tools = vec![ToolSpec {
            name: "web_search".into(),
            description: "d".into(),
            parameters: json!({"type": "object"}),
        }];
        let body = request_body(&req);
        assert_eq!(body["temperature"], json!(0.5));
        assert_eq!(body["messages"][1], json!({"role": "user", "content": "u"}));
        assert_eq!(body["messages"][2]["name"], json!("SafetyEngineer"));
        assert_eq!(body["tool_choice"], json!("auto"));
        req.tool_choice = ToolChoice::None;
        assert!(request_body(&req).get("tools").is_none());
    }

    #[test]
    fn malformed_bodies() {
        assert!(parse_chat_response("not json").is_err());
        assert!(parse_chat_response(r#"{"choices":[]}"#).is_err());
        assert!(parse_chat_response(
            r#"{"choices":[{"message":{"content":null},"finish_reason":"tool_calls"}]}"#
        )
        .is_err());
    }
}
