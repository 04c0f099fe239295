//! One agent turn: call the model, run any requested tools, feed the
//! results back, and stop at the first plain answer.

use super::{AgentError, AgentProfile, Meter, NodeKind};
use crate::conversation::{assemble_context, Message, ToolCall, Transcript};
use crate::llm::{CallMeta, ChatBackend, ChatRequest, ToolChoice};
use crate::tools::{ToolRegistry, ToolResult};

pub const SKIPPED_FOR_BUDGET: &str = "skipped: step node-call limit reached";
pub const SKIPPED_FOR_TOKENS: &str = "skipped: run token limit reached";

#[derive(Debug, Clone)]
pub struct TurnSettings<'a> {
    pub step: u32,
    pub model: &'a str,
    pub temperature: f64,
    pub max_output_tokens: Option<u32>,
    pub max_tool_rounds: u32,
    /// Ask the model to call a tool on its first request.
    pub require_tool: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TurnEnd {
    /// The model answered without tool calls.
    Answered,
    /// The answer came from the tools-disabled call after the round cap.
    ForcedAnswer,
    /// The step ran out of node calls before an answer arrived.
    BudgetExhausted,
    /// Even the tools-disabled call asked for tools; the turn ends without an answer.
    ToolRoundCapExceeded,
}

#[derive(Debug, Clone)]
pub struct TurnOutcome {
    pub final_answer: Option<Message>,
    pub rounds: Vec<(ToolCall, ToolResult)>,
    pub end: TurnEnd,
    pub model_calls: u32,
}

/// Runs one turn of `profile`, appending every produced message to
/// `transcript` as it happens, so a failure leaves a consistent prefix.
pub fn invoke_agent(
    backend: &dyn ChatBackend,
    registry: &ToolRegistry,
    profile: &AgentProfile,
    system_prompt: &str,
    transcript: &mut Transcript,
    settings: &TurnSettings<'_>,
    meter: &mut dyn Meter,
) -> Result<TurnOutcome, AgentError> {
    let specs: Vec<_> = profile.toolset.iter().map(|d| d.to_spec()).collect();
    let mut rounds = Vec::new();
    let mut tool_rounds = 0u32;
    let mut model_calls = 0u32;
    loop {
        if meter.remaining() == 0 {
            return Ok(TurnOutcome {
                final_answer: None,
                rounds,
                end: TurnEnd::BudgetExhausted,
                model_calls,
            });
        }
        let forced = tool_rounds >= settings.max_tool_rounds;
        let mut req = ChatRequest::new(
            settings.model,
            assemble_context(&profile.name, system_prompt, transcript.messages()),
            CallMeta {
                agent: profile.name.clone(),
                step: settings.step,
            },
        );
        req.temperature = profile.temperature.unwrap_or(settings.temperature);
        req.max_output_tokens = settings.max_output_tokens;
        if !specs.is_empty() && !forced {
            req.tools = specs.clone();
            req.tool_choice = if settings.require_tool && model_calls == 0 {
                ToolChoice::Required
            } else {
                ToolChoice::Auto
            };
        } else {
            req.tool_choice = ToolChoice::None;
        }
        meter.count(NodeKind::Agent, &profile.name);
        let response = backend.complete(&req)?;
        model_calls += 1;
        let within_tokens = meter.usage(&profile.name, response.usage);

        if response.tool_calls.is_empty() {
            let answer = Message::ai(profile.name.clone(), response.content_text())
                .with_usage(response.usage);
            let answer = if answer.content.trim().is_empty() {
                Message { content: "(no answer)".into(), ..answer }
            } else {
                answer
            };
            transcript.append(answer.clone())?;
            if !within_tokens {
                return Err(AgentError::TokenLimit { partial: None });
            }
            return Ok(TurnOutcome {
                final_answer: Some(answer),
                rounds,
                end: if forced { TurnEnd::ForcedAnswer } else { TurnEnd::Answered },
                model_calls,
            });
        }
        if forced {
            tracing::warn!(agent = %profile.name, "tools-disabled call still requested tools");
            if !within_tokens {
                return Err(AgentError::TokenLimit { partial: None });
            }
            return Ok(TurnOutcome {
                final_answer: None,
                rounds,
                end: TurnEnd::ToolRoundCapExceeded,
                model_calls,
            });
        }

        let calls = unique_call_ids(transcript, &response.tool_calls);
        transcript.append(
            Message::ai_with_tools(profile.name.clone(), response.content_text(), calls.clone())
                .with_usage(response.usage),
        )?;
        for call in &calls {
            let result = if !within_tokens {
                skipped(call, SKIPPED_FOR_TOKENS)
            } else if meter.remaining() == 0 {
                skipped(call, SKIPPED_FOR_BUDGET)
            } else {
                meter.count(NodeKind::Tool, &call.name);
                registry.dispatch(&profile.toolset, call)
            };
            transcript.append(Message::tool(
                call.name.clone(),
                call.id.clone(),
                result.content.clone(),
            ))?;
            rounds.push((call.clone(), result));
        }
        if !within_tokens {
            return Err(AgentError::TokenLimit { partial: None });
        }
        tool_rounds += 1;
    }
}

/// Some servers reuse call ids across responses; suffix repeats so every
/// tool result in a transcript answers exactly one call.
fn unique_call_ids(transcript: &Transcript, calls: &[ToolCall]) -> Vec<ToolCall> {
    let mut taken: std::collections::HashSet<String> = transcript
        .messages()
        .iter()
        .flat_map(|m| m.tool_calls.iter().map(|c| c.id.clone()))
        .collect();
    calls
        .iter()
        .map(|c| {
            let mut id = if c.id.is_empty() { "call".to_string() } else { c.id.clone() };
            let base = id.clone();
            let mut n = 1;
            while taken.contains(&id) {
                n += 1;
                id = format!("{base}-{n}");
            }
            taken.insert(id.clone());
            ToolCall { id, ..c.clone() }
        })
        .collect()
}

fn skipped(call: &ToolCall, why: &str) -> ToolResult {
    ToolResult {
        call_id: call.id.clone(),
        tool_name: call.name.clone(),
        content: why.to_string(),
        ok: false,
        diagnostics: Some(why.to_string()),
    }
}
