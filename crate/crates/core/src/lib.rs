//! Supervisor-routed team of tool-using language agents that works a
//! problem statement through a six-step TRIZ workflow.
//!
//! The crate is organised bottom-up:
//!
//! * [`knowledge`]: the 39 parameters, 40 inventive principles and the
//!   contradiction matrix.
//! * [`conversation`]: messages, transcripts, prompt templates and the
//!   persisted step/final documents.
//! * [`llm`]: the chat-completion contract with a live OpenAI-compatible
//!   client and a scripted backend for deterministic runs.
//! * [`tools`]: tool registry, web search, BM25 retrieval and the TRIZ tools.
//! * [`agents`]: profiles, the default team, supervisor routing and the
//!   per-agent turn loop.
//! * [`orchestrator`]: the workflow engine, limits, run reports and artifacts.
//! * [`config`] and [`cli`]: run configuration and the command-line surface.

pub mod agents;
pub mod cli;
pub mod config;
pub mod conversation;
pub mod knowledge;
pub mod llm;
pub mod orchestrator;
pub mod tools;

pub use knowledge::{KnowledgeBase, KnowledgeError, ParameterId, PrincipleId};
