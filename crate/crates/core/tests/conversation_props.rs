//! Generated transcripts: persistence round-trip and the demotion rule for
//! assembled model contexts.

use std::collections::HashSet;

use proptest::prelude::*;
use triz_agents::conversation::{
    assemble_context, parse_log, serialize_log, strip_demotion_prefix, Message, Role, ToolCall,
    Transcript,
};
use triz_agents::llm::TokenUsage;

const AGENTS: [&str; 4] = ["MechanicalEngineer", "SafetyEngineer", "TRIZSpecialist", "ProjectManager"];
const TOOLS: [&str; 3] = ["web_search", "contradiction_matrix_tool", "triz_rag_tool"];

#[derive(Debug, Clone)]
enum Event {
    Human(String),
    Answer(usize, String, Option<(u64, u64)>),
    /// Agent, tool indices, optional preamble.
    ToolRound(usize, Vec<usize>, String),
}

fn text() -> impl Strategy<Value = String> {
    // Unicode, quotes, newlines and braces all have to survive the NDJSON layer.
    prop_oneof![
        "[a-zA-Z0-9 .,]{1,40}",
        "\\PC{1,30}",
        Just("line one\nline \"two\"\t{x}".to_string()),
    ]
}

fn event() -> impl Strategy<Value = Event> {
    prop_oneof![
        text().prop_map(Event::Human),
        (0..AGENTS.len(), text(), proptest::option::of((0u64..5000, 0u64..900)))
            .prop_map(|(a, t, u)| Event::Answer(a, t, u)),
        (0..AGENTS.len(), proptest::collection::vec(0..TOOLS.len(), 1..4), "[a-z ]{0,12}")
            .prop_map(|(a, tools, pre)| Event::ToolRound(a, tools, pre)),
    ]
}

fn build(step: u32, events: &[Event]) -> Transcript {
    let mut t = Transcript::new(step);
    let mut next_id = 0;
    for e in events {
        match e {
            Event::Human(c) => t.append(Message::human("user", c.clone())).unwrap(),
            Event::Answer(a, c, usage) => {
                let mut m = Message::ai(AGENTS[*a], c.clone());
                if let Some((p, q)) = usage {
                    m = m.with_usage(TokenUsage::new(*p, *q));
                }
                t.append(m).unwrap()
            }
            Event::ToolRound(a, tools, pre) => {
                let calls: Vec<ToolCall> = tools
                    .iter()
                    .map(|i| {
                        next_id += 1;
                        ToolCall::new(format!("c{step}-{next_id}"), TOOLS[*i], format!("{{\"q\":{next_id}}}"))
                    })
                    .collect();
                t.append(Message::ai_with_tools(AGENTS[*a], pre.clone(), calls.clone())).unwrap();
                for c in calls {
                    t.append(Message::tool(c.name.clone(), c.id.clone(), format!("result for {}", c.id)))
                        .unwrap();
                }
            }
        }
    }
    t
}

fn transcripts() -> impl Strategy<Value = Vec<Transcript>> {
    proptest::collection::vec(proptest::collection::vec(event(), 1..12), 1..7).prop_map(|steps| {
        steps
            .iter()
            .enumerate()
            .map(|(i, evs)| build(i as u32 + 1, evs))
            .collect()
    })
}

proptest! {
    #[test]
    fn transcript_round_trip(ts in transcripts()) {
        let text = serialize_log(&ts);
        let back = parse_log(&text).unwrap();
        prop_assert_eq!(&back, &ts);
        prop_assert_eq!(serialize_log(&back), text);
    }

    #[test]
    fn no_foreign_ai_message_in_any_context(ts in transcripts(), who in 0..AGENTS.len()) {
        let agent = AGENTS[who];
        for t in &ts {
            let ctx = assemble_context(agent, "system prompt", t.messages());
            prop_assert_eq!(ctx[0].role, Role::System);
            prop_assert_eq!(ctx.iter().filter(|m| m.role == Role::System).count(), 1);
            let mut own_calls = HashSet::new();
            for m in &ctx {
                match m.role {
                    Role::Ai => {
                        prop_assert_eq!(&m.sender, agent);
                        own_calls.extend(m.tool_calls.iter().map(|c| c.id.clone()));
                    }
                    Role::Tool => {
                        let id = m.tool_call_id.clone().unwrap();
                        prop_assert!(own_calls.contains(&id), "tool result {} without own call", id);
                    }
                    _ => {}
                }
            }
            // every foreign plain answer is still present, demoted and recoverable
            for m in t.messages().iter().filter(|m| m.role == Role::Ai && m.sender != agent && m.tool_calls.is_empty()) {
                let found = ctx.iter().any(|c| {
                    c.role == Role::Human && c.sender == m.sender && strip_demotion_prefix(c) == Some(m.content.as_str())
                });
                prop_assert!(found, "answer from {} lost", m.sender);
            }
            // nothing is dropped except system messages
            prop_assert_eq!(ctx.len(), t.messages().len() + 1);
        }
    }
}

#[test]
fn parse_reports_the_offending_line() {
    let t = build(1, &[Event::Human("hi".into()), Event::Answer(0, "ok".into(), None)]);
    let mut text = serialize_log(&[t]);
    text.push_str("{\"step\":1,\"role\":\"tool\",\"sender\":\"web_search\",\"content\":\"x\",\"tool_call_id\":\"nope\"}\n");
    let err = parse_log(&text).unwrap_err().to_string();
    assert!(err.contains("line 4"), "{err}");
}
