//! Append-only per-step transcripts and their NDJSON persistence.
//!
//! A transcript file starts with one header record followed by one record
//! per message:
//!
//! ```text
//! {"schema":"triz-agents.transcript","version":1,"steps":[1,2]}
//! {"step":1,"role":"human","sender":"user","content":"Solve ..."}
//! ```

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::message::{Message, Role};
use super::ConversationError;

pub const TRANSCRIPT_SCHEMA: &str = "triz-agents.transcript";
pub const TRANSCRIPT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Transcript {
    step: u32,
    messages: Vec<Message>,
    open_calls: HashSet<String>,
    answered_calls: HashSet<String>,
}

impl Transcript {
    pub fn new(step: u32) -> Self {
        Self {
            step,
            ..Self::default()
        }
    }

    pub fn step(&self) -> u32 {
        self.step
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Appends a message after checking it against the transcript so far.
    pub fn append(&mut self, m: Message) -> Result<(), ConversationError> {
        m.validate()?;
        if m.role == Role::Tool {
            let id = m.tool_call_id.as_deref().unwrap_or_default();
            if !self.open_calls.contains(id) {
                return Err(ConversationError::OrphanToolResult(id.to_string()));
            }
            if !self.answered_calls.insert(id.to_string()) {
                return Err(ConversationError::DuplicateToolResult(id.to_string()));
            }
        }
        for call in &m.tool_calls {
            if !self.open_calls.insert(call.id.clone()) {
                return Err(ConversationError::InvalidMessage(format!(
                    "tool call id {:?} already used in this transcript",
                    call.id
                )));
            }
        }
        self.messages.push(m);
        Ok(())
    }

    /// Functional form of [`Transcript::append`].
    pub fn appended(mut self, m: Message) -> Result<Self, ConversationError> {
        self.append(m)?;
        Ok(self)
    }

    /// Tool calls that have no result yet.
    pub fn pending_tool_calls(&self) -> impl Iterator<Item = &str> {
        self.open_calls
            .iter()
            .filter(|id| !self.answered_calls.contains(*id))
            .map(String::as_str)
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
    steps: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    step: u32,
    #[serde(flatten)]
    message: Message,
}

/// Serializes several step transcripts into one NDJSON document.
pub fn serialize_log(transcripts: &[Transcript]) -> String {
    let header = Header {
        schema: TRANSCRIPT_SCHEMA.to_string(),
        version: TRANSCRIPT_VERSION,
        steps: transcripts.iter().map(Transcript::step).collect(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for t in transcripts {
        for m in &t.messages {
            let record = Record {
                step: t.step,
                message: m.clone(),
            };
            out.push_str(&serde_json::to_string(&record).expect("record serializes"));
            out.push('\n');
        }
    }
    out
}

pub fn serialize_transcript(t: &Transcript) -> String {
    serialize_log(std::slice::from_ref(t))
}

/// Parses an NDJSON transcript log. Every record is re-validated through
/// [`Transcript::append`], so a parsed log satisfies the same invariants as
/// one built in memory.
pub fn parse_log(text: &str) -> Result<Vec<Transcript>, ConversationError> {
    let perr = |line: usize, reason: String| ConversationError::Parse { line, reason };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (first_no, first) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| perr(1, "missing header record".into()))?;
    let header: Header =
        serde_json::from_str(first).map_err(|e| perr(first_no, format!("bad header: {e}")))?;
    if header.schema != TRANSCRIPT_SCHEMA {
        return Err(perr(first_no, format!("unknown schema {:?}", header.schema)));
    }
    if header.version != TRANSCRIPT_VERSION {
        return Err(perr(first_no, format!("unsupported version {}", header.version)));
    }
    let mut transcripts: Vec<Transcript> = header.steps.iter().map(|&s| Transcript::new(s)).collect();
    let mut current = 0usize;
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let record: Record =
            serde_json::from_str(line).map_err(|e| perr(no, e.to_string()))?;
        while current < transcripts.len() && transcripts[current].step != record.step {
            current += 1;
        }
        let t = transcripts.get_mut(current).ok_or_else(|| {
            perr(no, format!("step {} is not listed in the header or is out of order", record.step))
        })?;
        t.append(record.message).map_err(|e| perr(no, e.to_string()))?;
    }
    Ok(transcripts)
}

/// Parses a document holding exactly one transcript.
pub fn parse_transcript(text: &str) -> Result<Transcript, ConversationError> {
    let mut all = parse_log(text)?;
    if all.len() != 1 {
        return Err(ConversationError::Parse {
            line: 1,
            reason: format!("expected one transcript, header lists {}", all.len()),
        });
    }
    Ok(all.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conversation::ToolCall;
    use crate::llm::TokenUsage;

    fn sample() -> Transcript {
        let mut t = Transcript::new(1);
        t.append(Message::human("user", "Solve the following problem: cranes")).unwrap();
        t.append(Message::ai("ProjectManager", "MechanicalEngineer, define the system.")).unwrap();
        t.append(
            Message::ai_with_tools(
                "MechanicalEngineer",
                "",
                vec![ToolCall::new("call_1", "web_search", r#"{"query":"gantry crane"}"#)],
            )
            .with_usage(TokenUsage::new(1200, 30)),
        )
        .unwrap();
        t.append(Message::tool("web_search", "call_1", r#"[{"url":"u","content":"c"}]"#)).unwrap();
        t.append(Message::ai("MechanicalEngineer", "The system is a gantry crane.")).unwrap();
        t
    }

    #[test]
    fn orphan_tool_result_rejected() {
        let mut t = Transcript::new(2);
        let err = t.append(Message::tool("web_search", "nope", "x")).unwrap_err();
        assert!(matches!(err, ConversationError::OrphanToolResult(id) if id == "nope"));
        assert!(t.is_empty());
    }

    #[test]
    fn duplicate_tool_result_rejected() {
        let mut t = sample();
        let err = t.append(Message::tool("web_search", "call_1", "again")).unwrap_err();
        assert!(matches!(err, ConversationError::DuplicateToolResult(_)));
    }

    #[test]
    fn append_grows_by_one() {
        let mut t = sample();
        let before = t.messages().to_vec();
        t.append(Message::ai("SafetyEngineer", "Swing is a hazard.")).unwrap();
        assert_eq!(t.len(), before.len() + 1);
        assert_eq!(&t.messages()[..before.len()], &before[..]);
    }

    #[test]
    fn empty_round_trip() {
        let t = Transcript::new(3);
        let text = serialize_transcript(&t);
        assert_eq!(text.lines().count(), 1);
        assert_eq!(parse_transcript(&text).unwrap(), t);
    }

    #[test]
    fn tool_calls_round_trip() {
        let t = sample();
        let text = serialize_transcript(&t);
        let back = parse_transcript(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(serialize_transcript(&back), text);
    }

    #[test]
    fn truncated_file_reports_line() {
        let text = serialize_transcript(&sample());
        let cut = &text[..text.len() - 20];
        match parse_transcript(cut) {
            Err(ConversationError::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn interleaved_steps_rejected() {
        let mut a = Transcript::new(1);
        a.append(Message::human("user", "p")).unwrap();
        let mut b = Transcript::new(2);
        b.append(Message::human("user", "q")).unwrap();
        let text = serialize_log(&[a, b]);
        let mut lines: Vec<&str> = text.lines().collect();
        lines.swap(1, 2);
        assert!(parse_log(&lines.join("\n")).is_err());
    }
}
