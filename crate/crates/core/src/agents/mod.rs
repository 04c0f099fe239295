//! Agent profiles, the default team, routing and the turn loop.
//!
//! A profile file is markdown with TOML front matter between `+++` lines:
//!
//! ```text
//! +++
//! name = "SafetyEngineer"
//! role = "Safety Engineer"
//! responsibilities = "..."
//! context_mode = "docs_and_messages"
//! tools = ["web_search"]
//! +++
//! You are {name}, ... {responsibilities} ... {context}
//! ```
//!
//! Worker bodies must use `{name}`, `{role}`, `{responsibilities}` and
//! `{context}`; the supervisor body must use `{messages}`,
//! `{steps_documentation}` and `{members_names}`.

mod router;
mod turn;

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::conversation::{ConversationError, Message, PromptTemplate, TemplateInputs};
use crate::llm::{BackendError, TokenUsage};
use crate::tools::{ToolDescriptor, ToolRegistry};

pub use router::{parse_route, route_next, RouteRequest, RouteTarget, RouterDecision, FINISH};
pub use turn::{invoke_agent, TurnEnd, TurnOutcome, TurnSettings, SKIPPED_FOR_BUDGET, SKIPPED_FOR_TOKENS};

pub const SUPERVISOR: &str = "ProjectManager";
pub const DOCUMENTATION_AGENT: &str = "DocumentationSpecialist";
pub const TRIZ_SPECIALIST: &str = "TRIZSpecialist";

/// Worker roster in routing order.
pub const DEFAULT_ROSTER: [&str; 7] = [
    "MechanicalEngineer",
    "ElectricalEngineer",
    "ControlSystemsEngineer",
    "SafetyEngineer",
    TRIZ_SPECIALIST,
    "OperationsSpecialist",
    DOCUMENTATION_AGENT,
];

const WORKER_PLACEHOLDERS: [&str; 4] = ["name", "role", "responsibilities", "context"];
const SUPERVISOR_PLACEHOLDERS: [&str; 3] = ["messages", "steps_documentation", "members_names"];

const BUNDLED_PROFILES: [(&str, &str); 8] = [
    ("ProjectManager", include_str!("../../../../prompts/ProjectManager.md")),
    ("MechanicalEngineer", include_str!("../../../../prompts/MechanicalEngineer.md")),
    ("ElectricalEngineer", include_str!("../../../../prompts/ElectricalEngineer.md")),
    ("ControlSystemsEngineer", include_str!("../../../../prompts/ControlSystemsEngineer.md")),
    ("SafetyEngineer", include_str!("../../../../prompts/SafetyEngineer.md")),
    ("TRIZSpecialist", include_str!("../../../../prompts/TRIZSpecialist.md")),
    ("OperationsSpecialist", include_str!("../../../../prompts/OperationsSpecialist.md")),
    ("DocumentationSpecialist", include_str!("../../../../prompts/DocumentationSpecialist.md")),
];

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Conversation(#[from] ConversationError),
    /// The run's token budget is spent. `partial` is a reply that was
    /// received but not yet written to the transcript.
    #[error("run token limit reached")]
    TokenLimit { partial: Option<Box<Message>> },
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("cannot read profile {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("profile {0}: missing `+++` front matter")]
    MissingFrontMatter(String),
    #[error("profile {file}: {reason}")]
    Invalid { file: String, reason: String },
    #[error("profile {file}: unknown tool {tool:?}")]
    UnknownTool { file: String, tool: String },
    #[error("team: {0}")]
    Team(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    /// Only the current step's messages.
    FullMessages,
    /// Prior step documents in the system prompt plus the current messages.
    #[default]
    DocsAndMessages,
}

#[derive(Debug, Clone)]
pub struct AgentProfile {
    pub name: String,
    pub role: String,
    pub responsibilities: String,
    pub context_mode: ContextMode,
    pub toolset: Vec<ToolDescriptor>,
    pub extra_instructions: String,
    pub temperature: Option<f64>,
    pub template: PromptTemplate,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FrontMatter {
    name: String,
    role: String,
    responsibilities: String,
    #[serde(default)]
    context_mode: ContextMode,
    #[serde(default)]
    tools: Vec<String>,
    #[serde(default)]
    extra_instructions: String,
    temperature: Option<f64>,
}

impl AgentProfile {
    /// Parses a profile file. Tool names are resolved against `registry`.
    pub fn parse(file: &str, text: &str, registry: &ToolRegistry) -> Result<Self, ProfileError> {
        let invalid = |reason: String| ProfileError::Invalid {
            file: file.to_string(),
            reason,
        };
        let text = text.replace("\r\n", "\n");
        let rest = text
            .strip_prefix("+++\n")
            .ok_or_else(|| ProfileError::MissingFrontMatter(file.to_string()))?;
        let end = rest
            .find("\n+++\n")
            .ok_or_else(|| ProfileError::MissingFrontMatter(file.to_string()))?;
        let meta: FrontMatter = toml::from_str(&rest[..end]).map_err(|e| invalid(e.to_string()))?;
        let body = rest[end + 5..].trim();
        if meta.name.is_empty() || meta.name.chars().any(char::is_whitespace) {
            return Err(invalid(format!("name {:?} must be non-empty without whitespace", meta.name)));
        }
        if let Some(t) = meta.temperature {
            if !(0.0..=2.0).contains(&t) {
                return Err(invalid(format!("temperature {t} outside [0, 2]")));
            }
        }
        let mut toolset = Vec::new();
        for tool in &meta.tools {
            let d = registry.descriptor(tool).ok_or_else(|| ProfileError::UnknownTool {
                file: file.to_string(),
                tool: tool.clone(),
            })?;
            if toolset.iter().any(|t: &ToolDescriptor| t.name == d.name) {
                return Err(invalid(format!("tool {tool:?} listed twice")));
            }
            toolset.push(d.clone());
        }
        Ok(Self {
            name: meta.name,
            role: meta.role,
            responsibilities: meta.responsibilities.trim().to_string(),
            context_mode: meta.context_mode,
            toolset,
            extra_instructions: meta.extra_instructions.trim().to_string(),
            temperature: meta.temperature,
            template: PromptTemplate::parse(body),
        })
    }

    fn require_placeholders(&self, names: &[&str]) -> Result<(), ProfileError> {
        let have = self.template.placeholders();
        match names.iter().find(|n| !have.contains(*n)) {
            Some(missing) => Err(ProfileError::Invalid {
                file: self.name.clone(),
                reason: format!("template lacks {{{missing}}}"),
            }),
            None => Ok(()),
        }
    }

    /// Renders the body with whichever of `inputs` it references, then
    /// appends any extra instructions.
    pub fn render(&self, inputs: &TemplateInputs) -> Result<String, ConversationError> {
        let used = self.template.placeholders();
        let relevant: TemplateInputs = inputs
            .iter()
            .filter(|(k, _)| used.contains(k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let mut out = self.template.render(&relevant)?;
        if !self.extra_instructions.is_empty() {
            out.push_str("\n\n");
            out.push_str(&self.extra_instructions);
        }
        Ok(out)
    }

    /// The worker system prompt: name, role, responsibilities, context.
    pub fn system_prompt(&self, context: &str) -> Result<String, ConversationError> {
        self.render(&crate::conversation::inputs([
            ("name", self.name.as_str()),
            ("role", self.role.as_str()),
            ("responsibilities", self.responsibilities.as_str()),
            ("context", context),
        ]))
    }

    pub fn tool_names(&self) -> Vec<&str> {
        self.toolset.iter().map(|t| t.name.as_str()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Team {
    members: Vec<AgentProfile>,
    supervisor: AgentProfile,
    documentation_agent: String,
}

impl Team {
    pub fn new(
        members: Vec<AgentProfile>,
        supervisor: AgentProfile,
        documentation_agent: &str,
    ) -> Result<Self, ProfileError> {
        let mut seen = std::collections::HashSet::new();
        for m in &members {
            if !seen.insert(m.name.as_str()) || m.name == supervisor.name {
                return Err(ProfileError::Team(format!("duplicate member {}", m.name)));
            }
            m.require_placeholders(&WORKER_PLACEHOLDERS)?;
        }
        if !members.iter().any(|m| m.name == documentation_agent) {
            return Err(ProfileError::Team(format!(
                "documentation agent {documentation_agent} is not a member"
            )));
        }
        if !supervisor.toolset.is_empty() {
            return Err(ProfileError::Team("the supervisor must not carry tools".into()));
        }
        supervisor.require_placeholders(&SUPERVISOR_PLACEHOLDERS)?;
        Ok(Self {
            members,
            supervisor,
            documentation_agent: documentation_agent.to_string(),
        })
    }

    /// Loads `<dir>/<name>.md` for the supervisor and every roster entry.
    pub fn load(
        dir: &Path,
        roster: &[String],
        supervisor: &str,
        documentation_agent: &str,
        registry: &ToolRegistry,
    ) -> Result<Self, ProfileError> {
        let read = |name: &str| -> Result<AgentProfile, ProfileError> {
            let path = dir.join(format!("{name}.md"));
            let text = std::fs::read_to_string(&path).map_err(|e| ProfileError::Io {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
            let profile = AgentProfile::parse(&path.display().to_string(), &text, registry)?;
            if profile.name != name {
                return Err(ProfileError::Invalid {
                    file: path.display().to_string(),
                    reason: format!("declares name {:?}, expected {name:?}", profile.name),
                });
            }
            Ok(profile)
        };
        let members = roster.iter().map(|n| read(n)).collect::<Result<Vec<_>, _>>()?;
        Self::new(members, read(supervisor)?, documentation_agent)
    }

    pub fn members(&self) -> &[AgentProfile] {
        &self.members
    }

    pub fn supervisor(&self) -> &AgentProfile {
        &self.supervisor
    }

    pub fn documentation_agent(&self) -> &AgentProfile {
        self.member(&self.documentation_agent)
            .expect("documentation agent checked at construction")
    }

    pub fn member(&self, name: &str) -> Option<&AgentProfile> {
        self.members.iter().find(|m| m.name == name)
    }

    pub fn member_names(&self) -> Vec<&str> {
        self.members.iter().map(|m| m.name.as_str()).collect()
    }

    /// Every profile including the supervisor.
    pub fn all(&self) -> impl Iterator<Item = &AgentProfile> {
        std::iter::once(&self.supervisor).chain(self.members.iter())
    }
}

/// The eight bundled profiles: seven workers plus the supervisor.
pub fn build_default_team(registry: &ToolRegistry) -> Result<Team, ProfileError> {
    let parse = |name: &str| {
        let (_, text) = BUNDLED_PROFILES
            .iter()
            .find(|(n, _)| *n == name)
            .expect("bundled profile exists");
        AgentProfile::parse(&format!("prompts/{name}.md"), text, registry)
    };
    let members = DEFAULT_ROSTER
        .iter()
        .map(|n| parse(n))
        .collect::<Result<Vec<_>, _>>()?;
    Team::new(members, parse(SUPERVISOR)?, DOCUMENTATION_AGENT)
}

/// Raw text of a bundled profile file.
pub fn bundled_profile(name: &str) -> Option<&'static str> {
    BUNDLED_PROFILES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Routing,
    Agent,
    Tool,
}

/// Node-call and token accounting as seen by routing and turns.
pub trait Meter {
    /// Node calls still available in the current step.
    fn remaining(&self) -> u32;
    fn count(&mut self, kind: NodeKind, name: &str);
    /// Records a model call's usage; `false` once the run's token limit is exceeded.
    fn usage(&mut self, agent: &str, usage: TokenUsage) -> bool;
}
