use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::agents::NodeKind;
use crate::llm::{TokenUsage, UsageLedger};

/// How node calls are counted, stored in every report.
pub const NODE_CALL_DEFINITION: &str =
    "supervisor routings (one per decision, re-asks included) + agent model calls + tool dispatches";

/// Step key used for the final-report compilation in per-step tables.
pub const COMPILE_STEP: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub max_node_calls_per_step: u32,
    pub max_tool_rounds_per_turn: u32,
    pub max_router_retries: u32,
    /// `None` means unlimited.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_total_tokens: Option<u64>,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_node_calls_per_step: 25,
            max_tool_rounds_per_turn: 4,
            max_router_retries: 2,
            max_total_tokens: None,
        }
    }
}

impl Limits {
    /// One call per step is held back for documentation, so the per-step
    /// cap must leave room for at least one routing besides it.
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: &str| Err(OrchestratorError::Limits(m.to_string()));
        if self.max_node_calls_per_step < 2 {
            return bad("max_node_calls_per_step must be at least 2");
        }
        if self.max_tool_rounds_per_turn == 0 {
            return bad("max_tool_rounds_per_turn must be positive");
        }
        if self.max_router_retries == 0 {
            return bad("max_router_retries must be positive");
        }
        if self.max_total_tokens == Some(0) {
            return bad("max_total_tokens must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeCalls {
    pub total: u32,
    pub per_step: BTreeMap<u32, u32>,
    pub routing: u32,
    pub agent: u32,
    pub tool: u32,
}

impl NodeCalls {
    pub fn record(&mut self, step: u32, kind: NodeKind) {
        self.total += 1;
        *self.per_step.entry(step).or_default() += 1;
        match kind {
            NodeKind::Routing => self.routing += 1,
            NodeKind::Agent => self.agent += 1,
            NodeKind::Tool => self.tool += 1,
        }
    }

    pub fn in_step(&self, step: u32) -> u32 {
        self.per_step.get(&step).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortKind {
    /// A run limit stopped the run (exit code 2).
    Limits,
    /// The model backend failed (exit code 3).
    Backend,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state")]
pub enum RunStatus {
    Running,
    Completed,
    Aborted { kind: AbortKind, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitHit {
    pub step: u32,
    pub limit: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub status: RunStatus,
    pub model: String,
    pub steps_completed: u32,
    pub node_calls: NodeCalls,
    pub node_call_definition: String,
    pub tokens: UsageLedger,
    pub limits: Limits,
    pub limit_hits: Vec<LimitHit>,
    pub wall_time_ms: u64,
    /// Artifact file names, relative to the run directory.
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn new(run_id: &str, model: &str, limits: Limits) -> Self {
        Self {
            run_id: run_id.to_string(),
            status: RunStatus::Running,
            model: model.to_string(),
            steps_completed: 0,
            node_calls: NodeCalls::default(),
            node_call_definition: NODE_CALL_DEFINITION.to_string(),
            tokens: UsageLedger::default(),
            limits,
            limit_hits: Vec::new(),
            wall_time_ms: 0,
            artifacts: Vec::new(),
        }
    }

    /// Adds a model call's usage to the run, per-agent and per-step totals.
    pub fn accumulate_usage(&mut self, agent: &str, step: u32, usage: TokenUsage) {
        self.tokens.accumulate(agent, step, usage);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// JSON with the fields that legitimately differ between identical runs
    /// blanked out.
    pub fn masked_json(&self) -> String {
        let mut copy = self.clone();
        copy.run_id = String::new();
        copy.wall_time_ms = 0;
        copy.to_json()
    }

    pub fn summary(&self) -> String {
        let status = match &self.status {
            RunStatus::Completed => "completed".to_string(),
            RunStatus::Running => "running".to_string(),
            RunStatus::Aborted { kind, reason } => format!("aborted ({kind:?}): {reason}"),
        };
        let per_step: Vec<String> = self
            .node_calls
            .per_step
            .iter()
            .map(|(s, n)| if *s == COMPILE_STEP { format!("report={n}") } else { format!("{s}={n}") })
            .collect();
        format!(
            "status: {status}\nsteps completed: {}\nnode calls: {} (routing {}, agent {}, tool {}; per step {})\ntokens: {} (prompt {}, completion {})\nlimit hits: {}\nwall time: {} ms",
            self.steps_completed,
            self.node_calls.total,
            self.node_calls.routing,
            self.node_calls.agent,
            self.node_calls.tool,
            per_step.join(" "),
            self.tokens.total.total_tokens,
            self.tokens.total.prompt_tokens,
            self.tokens.total.completion_tokens,
            self.limit_hits.len(),
            self.wall_time_ms,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_limits() {
        let l = Limits::default();
        assert_eq!(
            (l.max_node_calls_per_step, l.max_tool_rounds_per_turn, l.max_router_retries, l.max_total_tokens),
            (25, 4, 2, None)
        );
        assert!(l.validate().is_ok());
        assert!(Limits { max_node_calls_per_step: 1, ..l }.validate().is_err());
        assert!(Limits { max_tool_rounds_per_turn: 0, ..l }.validate().is_err());
    }

    #[test]
    fn node_calls_record() {
        let mut n = NodeCalls::default();
        n.record(1, NodeKind::Routing);
        n.record(1, NodeKind::Agent);
        n.record(2, NodeKind::Tool);
        assert_eq!(n.total, 3);
        assert_eq!(n.routing + n.agent + n.tool, n.total);
        assert_eq!(n.in_step(1), 2);
    }

    #[test]
    fn masked_json_ignores_volatile_fields() {
        let mut a = RunReport::new("run-a", "gpt-4o", Limits::default());
        let mut b = RunReport::new("run-b", "gpt-4o", Limits::default());
        a.wall_time_ms = 5;
        b.wall_time_ms = 9;
        assert_eq!(a.masked_json(), b.masked_json());
        b.accumulate_usage("A", 1, TokenUsage::new(1, 1));
        assert_ne!(a.masked_json(), b.masked_json());
    }
}
