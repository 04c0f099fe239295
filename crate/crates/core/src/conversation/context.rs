//! Builds the message list one agent's model sees.

use super::message::{demote_to_human, Message, Role};

/// Assembles the model context for `agent` from a step's messages.
///
/// The agent's own answers and its own tool rounds keep their roles. Answers
/// from other agents are demoted to human messages; their tool traffic is
/// summarised as human text, because a model may only see tool results that
/// answer its own calls.
pub fn assemble_context(agent: &str, system_prompt: &str, messages: &[Message]) -> Vec<Message> {
    let mut out = Vec::with_capacity(messages.len() + 1);
    out.push(Message::system(system_prompt));
    let mut own_calls = std::collections::HashSet::new();
    for m in messages {
        match m.role {
            Role::System => {}
            Role::Human => out.push(m.clone()),
            Role::Ai if m.sender == agent => {
                own_calls.extend(m.tool_calls.iter().map(|c| c.id.clone()));
                out.push(m.clone());
            }
            Role::Ai if m.tool_calls.is_empty() => {
                out.push(demote_to_human(m).expect("ai message without tool calls"))
            }
            Role::Ai => {
                let calls: Vec<String> = m
                    .tool_calls
                    .iter()
                    .map(|c| format!("Calling {} tool: {}", c.name, c.arguments))
                    .collect();
                let mut text = format!("[{}]: ", m.sender);
                if !m.content.is_empty() {
                    text.push_str(&m.content);
                    text.push('\n');
                }
                text.push_str(&calls.join("\n"));
                out.push(Message::human(m.sender.clone(), text));
            }
            Role::Tool => {
                let id = m.tool_call_id.as_deref().unwrap_or_default();
                if own_calls.contains(id) {
                    out.push(m.clone());
                } else {
                    out.push(Message::human(
                        m.sender.clone(),
                        format!("[{}]: {}", m.sender, m.content),
                    ));
                }
            }
        }
    }
    out
}

/// Plain-text rendering of a conversation, used where a prompt embeds the
/// history as text (the supervisor template's `{messages}`).
pub fn render_messages_as_text(messages: &[Message]) -> String {
    let mut out = String::new();
    for m in messages {
        let line = match m.role {
            Role::Ai if !m.tool_calls.is_empty() => {
                let calls: Vec<String> = m
                    .tool_calls
                    .iter()
                    .map(|c| format!("Calling {} tool: {}", c.name, c.arguments))
                    .collect();
                if m.content.is_empty() {
                    format!("{}: {}", m.sender, calls.join("; "))
                } else {
                    format!("{}: {}\n{}", m.sender, m.content, calls.join("; "))
                }
            }
            Role::Tool => format!("Tool ({}): {}", m.sender, m.content),
            Role::System => continue,
            _ => format!("{}: {}", m.sender, m.content),
        };
        out.push_str(&line);
        out.push_str("\n\n");
    }
    out.trim_end().to_string()
}
