//! Workflow engine: runs each step as a supervised meeting, documents it,
//! then compiles the final report.
//!
//! Every step gets `max_node_calls_per_step` node calls. One of them is held
//! back so the step can always be documented, even when the team never
//! finishes on its own.

mod report;
mod sink;
mod workflow;

use std::time::Instant;

use chrono::{DateTime, SubsecRound, Utc};
use thiserror::Error;

use crate::agents::{
    invoke_agent, route_next, AgentError, ContextMode, Meter, NodeKind, RouteRequest, RouteTarget,
    Team, TurnEnd, TurnSettings,
};
use crate::conversation::{
    assemble_context, serialize_log, ConversationError, FinalReport, Message, StepDocument,
    Transcript, FINAL_REPORT_FILE, USER_SENDER,
};
use crate::llm::{CallMeta, ChatBackend, ChatRequest, TokenUsage, ToolChoice, DEFAULT_MODEL, DEFAULT_TEMPERATURE};
use crate::tools::ToolRegistry;

pub use report::{
    AbortKind, LimitHit, Limits, NodeCalls, RunReport, RunStatus, COMPILE_STEP, NODE_CALL_DEFINITION,
};
pub use sink::{ArtifactSink, DirSink, MemorySink};
pub use workflow::{WorkflowDefinition, WorkflowStep, DEFAULT_STEP_TITLES};

pub const TRANSCRIPT_FILE: &str = "transcript.ndjson";
pub const REPORT_FILE: &str = "report.json";
/// Sender of the per-step kickoff and documentation instructions.
pub const WORKFLOW_SENDER: &str = "workflow";
const NO_PRIOR_DOCS: &str = "(no previous steps have been documented yet)";
const EMPTY_DOC_BODY: &str = "(the documentation agent returned no text for this step)";

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("workflow: {0}")]
    Workflow(String),
    #[error("limits: {0}")]
    Limits(String),
    #[error("the problem statement is empty")]
    EmptyProblem,
    #[error("cannot document step {0}: its transcript is empty")]
    EmptyTranscript(u32),
    #[error("step {0} has no document")]
    MissingStepDocument(u32),
    #[error("cannot write artifact: {0}")]
    Sink(#[from] std::io::Error),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Conversation(#[from] ConversationError),
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

/// Wall clock, truncated to whole seconds.
#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now().trunc_subsecs(0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineSettings {
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: Option<u32>,
    /// Agents whose first request in a turn must call a tool.
    pub required_tools: Vec<String>,
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self {
            model: DEFAULT_MODEL.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_output_tokens: None,
            required_tools: Vec::new(),
        }
    }
}

/// Everything a run produced, complete or not.
#[derive(Debug, Clone)]
pub struct RunState {
    pub run_id: String,
    pub current_step: u32,
    pub transcripts: Vec<Transcript>,
    pub docs: Vec<StepDocument>,
    pub final_report: Option<FinalReport>,
    pub report: RunReport,
}

impl RunState {
    /// 0 completed, 2 aborted on limits, 3 aborted on backend.
    pub fn exit_code(&self) -> i32 {
        match &self.report.status {
            RunStatus::Completed => 0,
            RunStatus::Aborted { kind: AbortKind::Limits, .. } => 2,
            RunStatus::Aborted { kind: AbortKind::Backend, .. } | RunStatus::Running => 3,
        }
    }
}

/// Counts node calls and tokens into the run report for one step.
struct StepMeter<'r> {
    report: &'r mut RunReport,
    step: u32,
    cap: u32,
}

impl Meter for StepMeter<'_> {
    fn remaining(&self) -> u32 {
        self.cap.saturating_sub(self.report.node_calls.in_step(self.step))
    }

    fn count(&mut self, kind: NodeKind, _name: &str) {
        self.report.node_calls.record(self.step, kind);
    }

    fn usage(&mut self, agent: &str, usage: TokenUsage) -> bool {
        self.report.accumulate_usage(agent, self.step, usage);
        within_tokens(self.report)
    }
}

fn within_tokens(report: &RunReport) -> bool {
    report
        .limits
        .max_total_tokens
        .is_none_or(|max| report.tokens.total.total_tokens <= max)
}

pub struct Engine<'a> {
    pub backend: &'a dyn ChatBackend,
    pub team: &'a Team,
    pub registry: &'a ToolRegistry,
    pub workflow: &'a WorkflowDefinition,
    pub limits: Limits,
    pub settings: EngineSettings,
    pub clock: &'a dyn Clock,
}

impl Engine<'_> {
    /// Runs every step in order and persists the artifacts to `sink`.
    ///
    /// Step documents are written as they are produced. The transcript and
    /// run report are always written; the final report only when every step
    /// was documented. Backend failures and the token limit abort the run
    /// but still return `Ok` with the partial state.
    pub fn run_workflow(
        &self,
        run_id: &str,
        problem: &str,
        sink: &dyn ArtifactSink,
    ) -> Result<RunState, OrchestratorError> {
        if problem.trim().is_empty() {
            return Err(OrchestratorError::EmptyProblem);
        }
        self.workflow.validate()?;
        self.limits.validate()?;
        let started = Instant::now();
        let mut state = RunState {
            run_id: run_id.to_string(),
            current_step: 0,
            transcripts: Vec::new(),
            docs: Vec::new(),
            final_report: None,
            report: RunReport::new(run_id, &self.settings.model, self.limits),
        };

        let mut failure = None;
        for step in &self.workflow.steps {
            state.current_step = step.id;
            let mut transcript = Transcript::new(step.id);
            let result = self.run_step(step, &state.docs, problem, &mut transcript, &mut state.report);
            state.transcripts.push(transcript);
            match result {
                Ok(doc) => {
                    sink.write(&doc.file_name(), &doc.to_markdown())?;
                    state.report.artifacts.push(doc.file_name());
                    state.report.steps_completed += 1;
                    state.docs.push(doc);
                }
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        if failure.is_none() {
            match self.compile_final_report(&state.docs, &mut state.report) {
                Ok(fr) => {
                    sink.write(FINAL_REPORT_FILE, &fr.to_markdown())?;
                    state.report.artifacts.push(FINAL_REPORT_FILE.to_string());
                    state.final_report = Some(fr);
                }
                Err(e) => failure = Some(e),
            }
        }

        state.report.status = match failure {
            None => RunStatus::Completed,
            Some(e) => self.abort_status(e, &mut state),
        };
        if let RunStatus::Aborted { reason, .. } = &state.report.status {
            tracing::error!(step = state.current_step, %reason, "run aborted");
        }
        sink.write(TRANSCRIPT_FILE, &serialize_log(&state.transcripts))?;
        state.report.artifacts.push(TRANSCRIPT_FILE.to_string());
        state.report.artifacts.push(REPORT_FILE.to_string());
        state.report.wall_time_ms = started.elapsed().as_millis() as u64;
        sink.write(REPORT_FILE, &state.report.to_json())?;
        Ok(state)
    }

    fn abort_status(&self, e: OrchestratorError, state: &mut RunState) -> RunStatus {
        let step = state.current_step;
        match e {
            OrchestratorError::Agent(AgentError::TokenLimit { partial }) => {
                if let (Some(m), Some(t)) = (partial, state.transcripts.last_mut()) {
                    if let Err(err) = t.append(*m) {
                        tracing::warn!(%err, "partial reply not added to the transcript");
                    }
                }
                let detail = format!(
                    "{} tokens used, limit {}",
                    state.report.tokens.total.total_tokens,
                    self.limits.max_total_tokens.unwrap_or_default()
                );
                state.report.limit_hits.push(LimitHit {
                    step,
                    limit: "max_total_tokens".into(),
                    detail: detail.clone(),
                });
                RunStatus::Aborted {
                    kind: AbortKind::Limits,
                    reason: format!("run token limit reached in step {step}: {detail}"),
                }
            }
            other => RunStatus::Aborted {
                kind: AbortKind::Backend,
                reason: format!("step {step}: {other}"),
            },
        }
    }

    /// One step meeting. Messages are appended to `transcript` as they
    /// happen so a failure leaves a usable prefix behind.
    pub fn run_step(
        &self,
        step: &WorkflowStep,
        prior_docs: &[StepDocument],
        problem: &str,
        transcript: &mut Transcript,
        report: &mut RunReport,
    ) -> Result<StepDocument, OrchestratorError> {
        let cap = self.limits.max_node_calls_per_step;
        let work_cap = cap - 1;
        let docs_text = render_docs(prior_docs);
        if step.id == 1 {
            transcript.append(Message::human(USER_SENDER, problem.trim()))?;
        }
        transcript.append(Message::human(
            WORKFLOW_SENDER,
            format!(
                "Current step {} of {}: {}.\n{}",
                step.id,
                self.workflow.steps.len(),
                step.title,
                step.instructions
            ),
        ))?;

        // Latest document, and whether any worker has spoken after it.
        let mut last_doc: Option<StepDocument> = None;
        let mut spoke_since_doc = false;
        loop {
            if report.node_calls.in_step(step.id) >= work_cap {
                report.limit_hits.push(LimitHit {
                    step: step.id,
                    limit: "max_node_calls_per_step".into(),
                    detail: format!("{cap} node calls, one reserved for documentation"),
                });
                tracing::warn!(step = step.id, cap, "step node-call cap reached; documenting as truncated");
                let mut doc = match last_doc {
                    Some(doc) if !spoke_since_doc => doc,
                    _ => self.document_step(step, transcript, &docs_text, report)?,
                };
                doc.truncated = true;
                return Ok(doc);
            }

            let mut meter = StepMeter { report, step: step.id, cap: work_cap };
            let (decision, reply) = route_next(
                self.backend,
                self.team,
                &RouteRequest {
                    step: step.id,
                    messages: transcript.messages(),
                    steps_documentation: &docs_text,
                    model: &self.settings.model,
                    temperature: self.settings.temperature,
                    max_output_tokens: self.settings.max_output_tokens,
                    max_retries: self.limits.max_router_retries,
                },
                &mut meter,
            )?;
            if let Some(r) = reply {
                transcript.append(r)?;
            }
            if decision.fallback {
                report.limit_hits.push(LimitHit {
                    step: step.id,
                    limit: "max_router_retries".into(),
                    detail: format!("unparseable supervisor output {:?}; finishing step", decision.raw),
                });
            }

            match decision.target {
                RouteTarget::Finish => {
                    return match last_doc {
                        Some(doc) if !spoke_since_doc => Ok(doc),
                        _ => self.document_step(step, transcript, &docs_text, report),
                    };
                }
                RouteTarget::Next(name) if name == self.team.documentation_agent().name => {
                    last_doc = Some(self.document_step(step, transcript, &docs_text, report)?);
                    spoke_since_doc = false;
                }
                RouteTarget::Next(name) => {
                    let profile = self.team.member(&name).expect("router only returns members");
                    let context = match profile.context_mode {
                        ContextMode::DocsAndMessages => docs_text.as_str(),
                        ContextMode::FullMessages => "(none)",
                    };
                    let system = profile.system_prompt(context)?;
                    let settings = TurnSettings {
                        step: step.id,
                        model: &self.settings.model,
                        temperature: self.settings.temperature,
                        max_output_tokens: self.settings.max_output_tokens,
                        max_tool_rounds: self.limits.max_tool_rounds_per_turn,
                        require_tool: self.settings.required_tools.contains(&name),
                    };
                    let mut meter = StepMeter { report, step: step.id, cap: work_cap };
                    let outcome = invoke_agent(
                        self.backend,
                        self.registry,
                        profile,
                        &system,
                        transcript,
                        &settings,
                        &mut meter,
                    )?;
                    if outcome.end == TurnEnd::ToolRoundCapExceeded {
                        report.limit_hits.push(LimitHit {
                            step: step.id,
                            limit: "max_tool_rounds_per_turn".into(),
                            detail: format!("{name} kept requesting tools after the round cap"),
                        });
                    }
                    spoke_since_doc = true;
                }
            }
        }
    }

    /// One tools-disabled call to the documentation agent over the step
    /// transcript. The reply is added to the transcript and becomes the
    /// step document body.
    pub fn document_step(
        &self,
        step: &WorkflowStep,
        transcript: &mut Transcript,
        docs_text: &str,
        report: &mut RunReport,
    ) -> Result<StepDocument, OrchestratorError> {
        if transcript.is_empty() {
            return Err(OrchestratorError::EmptyTranscript(step.id));
        }
        let doc_agent = self.team.documentation_agent();
        let system = doc_agent.system_prompt(docs_text)?;
        let mut messages = assemble_context(&doc_agent.name, &system, transcript.messages());
        messages.push(Message::human(
            WORKFLOW_SENDER,
            format!(
                "Document step {}: {}. Write a concise markdown summary of what the team established in this step, the evidence and tool results it relied on, and any open issues.",
                step.id, step.title
            ),
        ));
        let body = self.documentation_call(step.id, messages, report)?;
        transcript.append(Message::ai(doc_agent.name.clone(), body.clone()))?;
        Ok(StepDocument::new(step.id, &step.title, body, &doc_agent.name, self.clock.now())?)
    }

    /// Compiles the step documents into the final report with one call,
    /// keyed as step 0.
    pub fn compile_final_report(
        &self,
        docs: &[StepDocument],
        report: &mut RunReport,
    ) -> Result<FinalReport, OrchestratorError> {
        let ids = self.workflow.step_ids();
        let mut ordered = Vec::with_capacity(ids.len());
        for id in &ids {
            let doc = docs
                .iter()
                .find(|d| d.step == *id)
                .ok_or(OrchestratorError::MissingStepDocument(*id))?;
            ordered.push(doc.clone());
        }
        let doc_agent = self.team.documentation_agent();
        let system = doc_agent.system_prompt(&render_docs(&ordered))?;
        let messages = vec![
            Message::system(system),
            Message::human(
                WORKFLOW_SENDER,
                format!(
                    "All {} steps are documented. Compile them into one concise final report that states the problem, the contradictions found, the principles applied and the proposed solutions.",
                    ids.len()
                ),
            ),
        ];
        let body = self.documentation_call(COMPILE_STEP, messages, report)?;
        Ok(FinalReport::new(body, ids.clone(), &ids, &doc_agent.name, self.clock.now())?)
    }

    fn documentation_call(
        &self,
        step: u32,
        messages: Vec<Message>,
        report: &mut RunReport,
    ) -> Result<String, OrchestratorError> {
        let doc_agent = self.team.documentation_agent();
        let mut req = ChatRequest::new(
            &self.settings.model,
            messages,
            CallMeta {
                agent: doc_agent.name.clone(),
                step,
            },
        );
        req.tool_choice = ToolChoice::None;
        req.temperature = doc_agent.temperature.unwrap_or(self.settings.temperature);
        req.max_output_tokens = self.settings.max_output_tokens;
        report.node_calls.record(step, NodeKind::Agent);
        let response = self.backend.complete(&req).map_err(AgentError::from)?;
        report.accumulate_usage(&doc_agent.name, step, response.usage);
        let body = match response.content_text().trim() {
            "" => EMPTY_DOC_BODY.to_string(),
            text => text.to_string(),
        };
        if !within_tokens(report) {
            let partial = (step != COMPILE_STEP).then(|| Box::new(Message::ai(doc_agent.name.clone(), body)));
            return Err(AgentError::TokenLimit { partial }.into());
        }
        Ok(body)
    }
}

/// Prior step documents as prompt context.
pub fn render_docs(docs: &[StepDocument]) -> String {
    if docs.is_empty() {
        return NO_PRIOR_DOCS.to_string();
    }
    docs.iter()
        .map(|d| format!("# Step {}: {}\n\n{}", d.step, d.title, d.body.trim_end()))
        .collect::<Vec<_>>()
        .join("\n\n")
}
