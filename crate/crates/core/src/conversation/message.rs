use serde::{Deserialize, Serialize};

use super::ConversationError;
use crate::llm::TokenUsage;

/// Sender recorded on the problem statement and other operator input.
pub const USER_SENDER: &str = "user";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    Human,
    Ai,
    Tool,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::Human => "human",
            Role::Ai => "ai",
            Role::Tool => "tool",
        }
    }
}

/// A tool invocation requested by a model. Arguments stay raw text; the
/// tool layer parses them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub id: String,
    pub name: String,
    pub arguments: String,
}

impl ToolCall {
    pub fn new(id: impl Into<String>, name: impl Into<String>, arguments: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            arguments: arguments.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub sender: String,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
}

impl Message {
    fn base(role: Role, sender: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            role,
            sender: sender.into(),
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: None,
            usage: None,
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::base(Role::System, "system", content)
    }

    pub fn human(sender: impl Into<String>, content: impl Into<String>) -> Self {
        Self::base(Role::Human, sender, content)
    }

    pub fn ai(sender: impl Into<String>, content: impl Into<String>) -> Self {
        Self::base(Role::Ai, sender, content)
    }

    pub fn ai_with_tools(
        sender: impl Into<String>,
        content: impl Into<String>,
        tool_calls: Vec<ToolCall>,
    ) -> Self {
        Self {
            tool_calls,
            ..Self::base(Role::Ai, sender, content)
        }
    }

    /// A tool result; `sender` is the tool name.
    pub fn tool(
        tool_name: impl Into<String>,
        tool_call_id: impl Into<String>,
        content: impl Into<String>,
    ) -> Self {
        Self {
            tool_call_id: Some(tool_call_id.into()),
            ..Self::base(Role::Tool, tool_name, content)
        }
    }

    pub fn with_usage(mut self, usage: TokenUsage) -> Self {
        self.usage = Some(usage);
        self
    }

    /// Checks the invariants that do not depend on the surrounding transcript.
    pub fn validate(&self) -> Result<(), ConversationError> {
        let bad = |reason: &str| Err(ConversationError::InvalidMessage(reason.to_string()));
        if self.sender.trim().is_empty() {
            return bad("sender is empty");
        }
        if self.content.is_empty() && self.tool_calls.is_empty() {
            return bad("content is empty and there are no tool calls");
        }
        if !self.tool_calls.is_empty() && self.role != Role::Ai {
            return bad("only ai messages carry tool calls");
        }
        match (self.role, &self.tool_call_id) {
            (Role::Tool, None) => return bad("tool message without tool_call_id"),
            (Role::Tool, Some(_)) => {}
            (_, Some(_)) => return bad("tool_call_id on a non-tool message"),
            _ => {}
        }
        if self.role == Role::Ai && self.sender.chars().any(char::is_whitespace) {
            return bad("ai sender must be an agent name without whitespace");
        }
        let mut ids = std::collections::HashSet::new();
        if !self.tool_calls.iter().all(|c| ids.insert(c.id.as_str())) {
            return bad("duplicate tool call id within one message");
        }
        Ok(())
    }
}

/// Prefix put in front of demoted content.
pub fn demotion_prefix(sender: &str) -> String {
    format!("[{sender}]: ")
}

/// Turns another agent's answer into a human message so the receiving model
/// reads it as conversation input rather than its own output.
pub fn demote_to_human(m: &Message) -> Result<Message, ConversationError> {
    if m.role != Role::Ai {
        return Err(ConversationError::NotAiMessage(m.role));
    }
    if !m.tool_calls.is_empty() {
        return Err(ConversationError::HasPendingToolCalls);
    }
    Ok(Message {
        role: Role::Human,
        sender: m.sender.clone(),
        content: format!("{}{}", demotion_prefix(&m.sender), m.content),
        tool_calls: Vec::new(),
        tool_call_id: None,
        usage: m.usage,
    })
}

/// Recovers the original content of a demoted message.
pub fn strip_demotion_prefix(m: &Message) -> Option<&str> {
    m.content.strip_prefix(&demotion_prefix(&m.sender))
}
