//! Adapters exposing the knowledge base to the TRIZ specialist.

use std::sync::Arc;

use super::{Args, ParamKind, ParamSpec, Tool, ToolDescriptor, ToolError};
use crate::knowledge::{KnowledgeBase, PrincipleId};

pub const NO_PRINCIPLES_MESSAGE: &str = "no inventive principles recorded for this pair";

pub struct TrizFeaturesTool {
    kb: Arc<KnowledgeBase>,
    descriptor: ToolDescriptor,
}

impl TrizFeaturesTool {
    pub fn new(kb: Arc<KnowledgeBase>) -> Self {
        Self {
            kb,
            descriptor: ToolDescriptor {
                name: super::TRIZ_FEATURES.into(),
                description: "List the 39 TRIZ engineering parameters (features) with their ids."
                    .into(),
                parameters: Vec::new(),
            },
        }
    }
}

impl Tool for TrizFeaturesTool {
    fn descriptor(&self) -> &ToolDescriptor {
        &self.descriptor
    }

    fn call(&self, _args: &Args) -> Result<String, ToolError> {
        let lines: Vec<String> = self
            .kb
            .parameters()
            .iter()
            .map(|p| format!("{}. {}", p.id, p.name))
            .collect();
        Ok(lines.join("\n"))
    }
}

pub struct ContradictionMatrixTool {
    kb: Arc<KnowledgeBase>,
    descriptor: ToolDescriptor,
}

impl ContradictionMatrixTool {
    pub fn new(kb: Arc<KnowledgeBase>) -> Self {
        Self {
            kb,
            descriptor: ToolDescriptor {
                name: super::CONTRADICTION_MATRIX.into(),
                description: "Look up the contradiction matrix: inventive principles recommended \
                              when improving one TRIZ parameter worsens another."
                    .into(),
                parameters: vec![
                    ParamSpec::new(
                        "improving",
                        ParamKind::IntegerOrString,
                        "Id (1-39) or exact name of the parameter being improved",
                        true,
                    ),
                    ParamSpec::new(
                        "worsening",
                        ParamKind::IntegerOrString,
                        "Id (1-39) or exact name of the parameter that gets worse",
                        true,
                    ),
                ],
            },
        }
    }
}

/// Numbered `id name` lines for a list of principles.
pub fn render_principle_ids(kb: &KnowledgeBase, ids: &[PrincipleId]) -> String {
    ids.iter()
        .enumerate()
        .map(|(i, id)| format!("{}. Principle {}: {}", i + 1, id, kb.principle(*id).name))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Tool for ContradictionMatrixTool {
    fn descriptor(&self) -> &ToolDescriptor {
        &self.descriptor
    }

    fn call(&self, args: &Args) -> Result<String, ToolError> {
        let resolve = |field: &str| -> Result<_, ToolError> {
            let key = args.id_or_name(field)?;
            self.kb.resolve_parameter(&key).map_err(|e| {
                let hints: Vec<String> = self
                    .kb
                    .parameter_candidates(&key)
                    .iter()
                    .take(5)
                    .map(|p| format!("{} {}", p.id, p.name))
                    .collect();
                let hint = if hints.is_empty() {
                    String::new()
                } else {
                    format!(" (candidates: {})", hints.join("; "))
                };
                ToolError::field(field, format!("{e}{hint}"))
            })
        };
        let improving = resolve("improving")?;
        let worsening = resolve("worsening")?;
        let ids = self
            .kb
            .lookup_matrix(improving.get(), worsening.get())
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        let header = format!(
            "Improving: {} {}\nWorsening: {} {}\n",
            improving,
            self.kb.parameter(improving).name,
            worsening,
            self.kb.parameter(worsening).name
        );
        if ids.is_empty() {
            Ok(format!("{header}Result: {NO_PRINCIPLES_MESSAGE}."))
        } else {
            Ok(format!(
                "{header}Recommended inventive principles:\n{}",
                render_principle_ids(&self.kb, ids)
            ))
        }
    }
}

pub struct InventivePrinciplesTool {
    kb: Arc<KnowledgeBase>,
    descriptor: ToolDescriptor,
}

impl InventivePrinciplesTool {
    pub fn new(kb: Arc<KnowledgeBase>) -> Self {
        Self {
            kb,
            descriptor: ToolDescriptor {
                name: super::INVENTIVE_PRINCIPLES.into(),
                description: "Describe inventive principles in detail, given their ids (1-40)."
                    .into(),
                parameters: vec![ParamSpec::new(
                    "ids",
                    ParamKind::IntegerArray,
                    "Inventive principle ids",
                    true,
                )],
            },
        }
    }
}

impl Tool for InventivePrinciplesTool {
    fn descriptor(&self) -> &ToolDescriptor {
        &self.descriptor
    }

    fn call(&self, args: &Args) -> Result<String, ToolError> {
        let ids = args.uint_list("ids")?;
        let records = self
            .kb
            .principle_details(&ids)
            .map_err(|e| ToolError::field("ids", e.to_string()))?;
        if records.is_empty() {
            return Ok("No principle ids given.".into());
        }
        let mut out = String::new();
        for (i, p) in records.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&format!("{}. Principle {}: {}\n   {}\n", i + 1, p.id, p.name, p.description));
            for sub in &p.sub_principles {
                out.push_str(&format!("   - {sub}\n"));
            }
        }
        Ok(out.trim_end().to_string())
    }
}
