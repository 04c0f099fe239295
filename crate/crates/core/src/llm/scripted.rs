//! Deterministic backend that replays a script of responses.
//!
//! A script is NDJSON, one entry per model call, in the order the run will
//! make them. Blank lines and lines starting with `#` are ignored.
//!
//! ```text
//! {"agent":"ProjectManager","step":1,"turn":0,"response":{"content":"MechanicalEngineer","usage":{"prompt_tokens":900,"completion_tokens":4}}}
//! ```
//!
//! `turn` counts calls made on behalf of one agent within one step,
//! starting at 0. `finish_reason` and `total_tokens` may be omitted.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{BackendError, ChatBackend, ChatRequest, ChatResponse, FinishReason, TokenUsage};
use crate::conversation::ToolCall;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScriptKey {
    pub agent: String,
    pub step: u32,
    pub turn: u32,
}

impl fmt::Display for ScriptKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, step {}, turn {})", self.agent, self.step, self.turn)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptEntry {
    pub key: ScriptKey,
    pub response: ChatResponse,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Script {
    entries: Vec<ScriptEntry>,
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read script {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("script line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Serialize, Deserialize)]
struct RawUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    total_tokens: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct RawResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    content: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    tool_calls: Vec<ToolCall>,
    #[serde(default)]
    usage: Option<RawUsage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    finish_reason: Option<FinishReason>,
}

#[derive(Serialize, Deserialize)]
struct RawEntry {
    agent: String,
    step: u32,
    turn: u32,
    response: RawResponse,
}

impl Script {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[ScriptEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn load(path: &Path) -> Result<Self, ScriptError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let err = |reason: String| ScriptError::Parse { line: line_no, reason };
            let raw: RawEntry = serde_json::from_str(trimmed).map_err(|e| err(e.to_string()))?;
            let usage = match raw.response.usage {
                None => TokenUsage::ZERO,
                Some(u) => {
                    let usage = TokenUsage::new(u.prompt_tokens, u.completion_tokens);
                    if u.total_tokens.is_some_and(|t| t != usage.total_tokens) {
                        return Err(err("total_tokens differs from prompt + completion".into()));
                    }
                    usage
                }
            };
            let derived = if raw.response.tool_calls.is_empty() {
                FinishReason::Stop
            } else {
                FinishReason::ToolCalls
            };
            let response = ChatResponse {
                content: raw.response.content,
                tool_calls: raw.response.tool_calls,
                usage,
                finish_reason: raw.response.finish_reason.unwrap_or(derived),
            };
            if !response.is_consistent() {
                return Err(err("finish_reason disagrees with tool_calls".into()));
            }
            entries.push(ScriptEntry {
                key: ScriptKey {
                    agent: raw.agent,
                    step: raw.step,
                    turn: raw.turn,
                },
                response,
            });
        }
        Ok(Self { entries })
    }

    /// Canonical NDJSON form; `parse(to_ndjson(s)) == s`.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let raw = RawEntry {
                agent: e.key.agent.clone(),
                step: e.key.step,
                turn: e.key.turn,
                response: RawResponse {
                    content: e.response.content.clone(),
                    tool_calls: e.response.tool_calls.clone(),
                    usage: Some(RawUsage {
                        prompt_tokens: e.response.usage.prompt_tokens,
                        completion_tokens: e.response.usage.completion_tokens,
                        total_tokens: Some(e.response.usage.total_tokens),
                    }),
                    finish_reason: Some(e.response.finish_reason),
                },
            };
            out.push_str(&serde_json::to_string(&raw).expect("script entry serializes"));
            out.push('\n');
        }
        out
    }

    /// Sum of every entry's usage.
    pub fn total_usage(&self) -> TokenUsage {
        self.entries.iter().map(|e| e.response.usage).sum()
    }

    /// Number of tool calls across all entries.
    pub fn tool_call_count(&self) -> usize {
        self.entries.iter().map(|e| e.response.tool_calls.len()).sum()
    }
}

#[derive(Default)]
struct Cursor {
    position: usize,
    turns: HashMap<(String, u32), u32>,
    requests: Vec<ChatRequest>,
}

/// Serves script entries in order and checks each request's key against
/// the next entry.
pub struct ScriptedBackend {
    script: Script,
    cursor: Mutex<Cursor>,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        Self {
            script,
            cursor: Mutex::new(Cursor::default()),
        }
    }

    pub fn script(&self) -> &Script {
        &self.script
    }

    /// Entries consumed so far.
    pub fn consumed(&self) -> usize {
        self.cursor.lock().expect("cursor lock").position
    }

    /// Copies of every request received, in order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.cursor.lock().expect("cursor lock").requests.clone()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        req.check()?;
        let mut cursor = self.cursor.lock().expect("cursor lock");
        let turn = *cursor
            .turns
            .get(&(req.meta.agent.clone(), req.meta.step))
            .unwrap_or(&0);
        let got = ScriptKey {
            agent: req.meta.agent.clone(),
            step: req.meta.step,
            turn,
        };
        let entry = self
            .script
            .entries
            .get(cursor.position)
            .ok_or_else(|| BackendError::ScriptExhausted(got.clone()))?;
        if entry.key != got {
            return Err(BackendError::KeyMismatch {
                expected: entry.key.clone(),
                got,
            });
        }
        cursor.position += 1;
        cursor.turns.insert((got.agent, got.step), turn + 1);
        cursor.requests.push(req.clone());
        Ok(entry.response.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conversation::Message;
    use crate::llm::CallMeta;

    const SCRIPT: &str = r#"
# supervisor opens step 1
{"agent":"ProjectManager","step":1,"turn":0,"response":{"content":"MechanicalEngineer","usage":{"prompt_tokens":900,"completion_tokens":4}}}
{"agent":"MechanicalEngineer","step":1,"turn":0,"response":{"tool_calls":[{"id":"c1","name":"web_search","arguments":"{\"query\":\"gantry crane\"}"}],"usage":{"prompt_tokens":1000,"completion_tokens":20}}}
"#;

    fn req(agent: &str, step: u32) -> ChatRequest {
        ChatRequest::new(
            "gpt-4o",
            vec![Message::human("user", "p")],
            CallMeta {
                agent: agent.into(),
                step,
            },
        )
    }

    #[test]
    fn serves_in_order() {
        let b = ScriptedBackend::new(Script::parse(SCRIPT).unwrap());
        let r = b.complete(&req("ProjectManager", 1)).unwrap();
        assert_eq!(r.content.as_deref(), Some("MechanicalEngineer"));
        assert_eq!(r.finish_reason, FinishReason::Stop);
        let r = b.complete(&req("MechanicalEngineer", 1)).unwrap();
        assert_eq!(r.finish_reason, FinishReason::ToolCalls);
        assert_eq!(r.usage.total_tokens, 1020);
        assert!(matches!(
            b.complete(&req("ProjectManager", 1)),
            Err(BackendError::ScriptExhausted(k)) if k.turn == 1
        ));
    }

    #[test]
    fn out_of_order_is_key_mismatch() {
        let b = ScriptedBackend::new(Script::parse(SCRIPT).unwrap());
        assert!(matches!(
            b.complete(&req("MechanicalEngineer", 1)),
            Err(BackendError::KeyMismatch { .. })
        ));
    }

    #[test]
    fn canonical_round_trip() {
        let s = Script::parse(SCRIPT).unwrap();
        assert_eq!(Script::parse(&s.to_ndjson()).unwrap(), s);
        assert_eq!(s.total_usage().total_tokens, 1924);
        assert_eq!(s.tool_call_count(), 1);
    }

    #[test]
    fn rejects_inconsistent_entries() {
        let bad = r#"{"agent":"A","step":1,"turn":0,"response":{"content":"x","finish_reason":"tool_calls"}}"#;
        assert!(matches!(Script::parse(bad), Err(ScriptError::Parse { line: 1, .. })));
        let bad_total = r#"{"agent":"A","step":1,"turn":0,"response":{"content":"x","usage":{"prompt_tokens":1,"completion_tokens":1,"total_tokens":3}}}"#;
        assert!(Script::parse(bad_total).is_err());
    }

    #[test]
    fn identical_runs_identical_responses() {
        let s = Script::parse(SCRIPT).unwrap();
        let run = || {
            let b = ScriptedBackend::new(s.clone());
            vec![
                b.complete(&req("ProjectManager", 1)).unwrap(),
                b.complete(&req("MechanicalEngineer", 1)).unwrap(),
            ]
        };
        assert_eq!(run(), run());
    }
}
