use std::path::Path;

use serde::{Deserialize, Serialize};

use super::OrchestratorError;

const BUNDLED_WORKFLOW: &str = include_str!("../../../../data/workflow.toml");

/// Titles of the default six steps, in order.
pub const DEFAULT_STEP_TITLES: [&str; 6] = [
    "Defining Engineering System",
    "Function Analysis",
    "Cause and Effect Chain Analysis (CECA)",
    "Engineering Contradiction and Contradiction Matrix",
    "Physical Contradiction",
    "Solutions",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowStep {
    pub id: u32,
    pub title: String,
    pub instructions: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowDefinition {
    pub steps: Vec<WorkflowStep>,
}

impl WorkflowDefinition {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_WORKFLOW).expect("bundled workflow is valid")
    }

    pub fn load(path: &Path) -> Result<Self, OrchestratorError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| OrchestratorError::Workflow(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, OrchestratorError> {
        let mut def: Self =
            toml::from_str(text).map_err(|e| OrchestratorError::Workflow(e.to_string()))?;
        for s in &mut def.steps {
            s.title = s.title.trim().to_string();
            s.instructions = s.instructions.trim().to_string();
        }
        def.validate()?;
        Ok(def)
    }

    /// Steps must be numbered 1..=n in order, with titles.
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if self.steps.is_empty() {
            return Err(OrchestratorError::Workflow("workflow has no steps".into()));
        }
        for (i, s) in self.steps.iter().enumerate() {
            if s.id != i as u32 + 1 {
                return Err(OrchestratorError::Workflow(format!(
                    "step at position {} has id {}, expected {}",
                    i + 1,
                    s.id,
                    i + 1
                )));
            }
            if s.title.is_empty() {
                return Err(OrchestratorError::Workflow(format!("step {} has no title", s.id)));
            }
        }
        Ok(())
    }

    pub fn step_ids(&self) -> Vec<u32> {
        self.steps.iter().map(|s| s.id).collect()
    }
}
