//! Supervisor routing: turn free model text into a roster member or FINISH.

use serde::{Deserialize, Serialize};

use super::{AgentError, Meter, NodeKind, Team};
use crate::conversation::{inputs, render_messages_as_text, Message};
use crate::llm::{CallMeta, ChatBackend, ChatRequest, ToolChoice};

pub const FINISH: &str = "FINISH";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RouteTarget {
    Next(String),
    Finish,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouterDecision {
    pub target: RouteTarget,
    /// Model output as received on the accepted (or last) attempt.
    pub raw: String,
    pub retries_used: u32,
    /// True when no attempt parsed and the router fell back to FINISH.
    pub fallback: bool,
}

fn squash(s: &str) -> String {
    s.chars()
        .filter(|c| !c.is_ascii_punctuation() && !c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Maps supervisor output onto `members ∪ {FINISH}`.
///
/// First the whole reply is compared with punctuation and whitespace
/// removed, ignoring case ("finish." is FINISH). Failing that, the first
/// word that is exactly a member name or `FINISH` wins, so prose such as
/// "ControlSystemsEngineer, could you begin" routes correctly. Anything
/// else is `None`.
pub fn parse_route(output: &str, members: &[&str]) -> Option<RouteTarget> {
    let whole = squash(output);
    if !whole.is_empty() {
        if whole == FINISH.to_lowercase() {
            return Some(RouteTarget::Finish);
        }
        if let Some(m) = members.iter().find(|m| squash(m) == whole) {
            return Some(RouteTarget::Next(m.to_string()));
        }
    }
    output
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .find_map(|word| {
            if word == FINISH {
                Some(RouteTarget::Finish)
            } else {
                members
                    .iter()
                    .find(|m| **m == word)
                    .map(|m| RouteTarget::Next(m.to_string()))
            }
        })
}

pub struct RouteRequest<'a> {
    pub step: u32,
    pub messages: &'a [Message],
    pub steps_documentation: &'a str,
    pub model: &'a str,
    pub temperature: f64,
    pub max_output_tokens: Option<u32>,
    pub max_retries: u32,
}

/// One routing decision. Counts as a single node call however many
/// re-asks it takes; every attempt's tokens are metered.
pub fn route_next(
    backend: &dyn ChatBackend,
    team: &Team,
    req: &RouteRequest<'_>,
    meter: &mut dyn Meter,
) -> Result<(RouterDecision, Option<Message>), AgentError> {
    let supervisor = team.supervisor();
    let names = team.member_names();
    let members_names = names.join(", ");
    let prompt = supervisor.render(&inputs([
        ("name", supervisor.name.as_str()),
        ("role", supervisor.role.as_str()),
        ("responsibilities", supervisor.responsibilities.as_str()),
        ("messages", render_messages_as_text(req.messages).as_str()),
        ("steps_documentation", req.steps_documentation),
        ("members_names", members_names.as_str()),
    ]))?;
    let mut messages = vec![Message::system(prompt)];
    meter.count(NodeKind::Routing, &supervisor.name);
    let mut retries = 0;
    loop {
        let mut chat = ChatRequest::new(
            req.model,
            messages.clone(),
            CallMeta {
                agent: supervisor.name.clone(),
                step: req.step,
            },
        );
        chat.tool_choice = ToolChoice::None;
        chat.temperature = supervisor.temperature.unwrap_or(req.temperature);
        chat.max_output_tokens = req.max_output_tokens;
        let response = backend.complete(&chat)?;
        let within_tokens = meter.usage(&supervisor.name, response.usage);
        let raw = response.content_text().to_string();
        let reply = (!raw.trim().is_empty())
            .then(|| Message::ai(supervisor.name.clone(), raw.clone()).with_usage(response.usage));
        if !within_tokens {
            return Err(AgentError::TokenLimit { partial: reply.map(Box::new) });
        }
        if let Some(target) = parse_route(&raw, &names) {
            let decision = RouterDecision {
                target,
                raw,
                retries_used: retries,
                fallback: false,
            };
            return Ok((decision, reply));
        }
        if retries >= req.max_retries {
            tracing::warn!(step = req.step, output = %raw, "router output never matched the roster; finishing step");
            let decision = RouterDecision {
                target: RouteTarget::Finish,
                raw,
                retries_used: retries,
                fallback: true,
            };
            return Ok((decision, reply));
        }
        retries += 1;
        if let Some(r) = reply {
            messages.push(r);
        }
        messages.push(Message::human(
            "user",
            format!(
                "That reply did not name a valid option. Answer with exactly one of: {members_names} or {FINISH}."
            ),
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const M: [&str; 3] = ["MechanicalEngineer", "ControlSystemsEngineer", "DocumentationSpecialist"];

    #[test]
    fn exact_and_normalized() {
        assert_eq!(
            parse_route("ControlSystemsEngineer", &M),
            Some(RouteTarget::Next("ControlSystemsEngineer".into()))
        );
        assert_eq!(parse_route("FINISH", &M), Some(RouteTarget::Finish));
        assert_eq!(parse_route("finish.", &M), Some(RouteTarget::Finish));
        assert_eq!(parse_route("  **mechanicalengineer**\n", &M), Some(RouteTarget::Next("MechanicalEngineer".into())));
        assert_eq!(parse_route("Mechanical Engineer", &M), Some(RouteTarget::Next("MechanicalEngineer".into())));
    }

    #[test]
    fn prose_takes_first_roster_word() {
        assert_eq!(
            parse_route("ControlSystemsEngineer, could you begin with the sway problem?", &M),
            Some(RouteTarget::Next("ControlSystemsEngineer".into()))
        );
        assert_eq!(
            parse_route("We are done here. FINISH", &M),
            Some(RouteTarget::Finish)
        );
    }

    #[test]
    fn unknown_names_do_not_route() {
        assert_eq!(parse_route("ChiefEngineer", &M), None);
        assert_eq!(parse_route("", &M), None);
        assert_eq!(parse_route("the mechanicalengineer should go", &M), None);
        assert_eq!(parse_route("finished", &M), None);
    }
}
