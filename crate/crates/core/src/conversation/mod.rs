//! Messages, transcripts, prompt templates and run documents.

mod context;
mod document;
mod message;
mod template;
mod transcript;

use thiserror::Error;

pub use context::{assemble_context, render_messages_as_text};
pub use document::{mask_timestamps, FinalReport, StepDocument, FINAL_REPORT_FILE, TIMESTAMP_KEY};
pub use message::{
    demote_to_human, demotion_prefix, strip_demotion_prefix, Message, Role, ToolCall, USER_SENDER,
};
pub use template::{inputs, PromptTemplate, Segment, TemplateInputs, UnusedInputs};
pub use transcript::{
    parse_log, parse_transcript, serialize_log, serialize_transcript, Transcript,
    TRANSCRIPT_SCHEMA, TRANSCRIPT_VERSION,
};

#[derive(Debug, Error)]
pub enum ConversationError {
    #[error("message is not an ai message (role {0:?})")]
    NotAiMessage(Role),
    #[error("message still has pending tool calls")]
    HasPendingToolCalls,
    #[error("tool result {0:?} does not answer any earlier tool call")]
    OrphanToolResult(String),
    #[error("tool call {0:?} already has a result")]
    DuplicateToolResult(String),
    #[error("invalid message: {0}")]
    InvalidMessage(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("template input missing: {0}")]
    MissingInput(String),
    #[error("template has no placeholder named {0}")]
    UnknownPlaceholder(String),
    #[error("document for step {0} has an empty body")]
    EmptyDocument(u32),
}
