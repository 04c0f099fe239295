//! `{placeholder}` prompt templates.
//!
//! A placeholder is `{name}` where `name` is an ASCII identifier. `{{` and
//! `}}` produce literal braces; any other brace is kept as written, so JSON
//! snippets in prompt files survive unchanged.

use std::collections::{BTreeMap, BTreeSet};

use super::ConversationError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Literal(String),
    Placeholder(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    segments: Vec<Segment>,
}

/// What to do with inputs the template never references.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnusedInputs {
    #[default]
    Warn,
    Reject,
}

pub type TemplateInputs = BTreeMap<String, String>;

/// Builds a [`TemplateInputs`] map from `(name, value)` pairs.
pub fn inputs<I, K, V>(pairs: I) -> TemplateInputs
where
    I: IntoIterator<Item = (K, V)>,
    K: Into<String>,
    V: Into<String>,
{
    pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect()
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl PromptTemplate {
    pub fn parse(text: &str) -> Self {
        let mut segments = Vec::new();
        let mut literal = String::new();
        let mut rest = text;
        while let Some(pos) = rest.find(['{', '}']) {
            literal.push_str(&rest[..pos]);
            let tail = &rest[pos..];
            if let Some(after) = tail.strip_prefix("{{") {
                literal.push('{');
                rest = after;
            } else if let Some(after) = tail.strip_prefix("}}") {
                literal.push('}');
                rest = after;
            } else if let Some(body) = tail.strip_prefix('{') {
                match body.find('}') {
                    Some(end) if is_ident(&body[..end]) => {
                        if !literal.is_empty() {
                            segments.push(Segment::Literal(std::mem::take(&mut literal)));
                        }
                        segments.push(Segment::Placeholder(body[..end].to_string()));
                        rest = &body[end + 1..];
                    }
                    _ => {
                        literal.push('{');
                        rest = body;
                    }
                }
            } else {
                literal.push('}');
                rest = &tail[1..];
            }
        }
        literal.push_str(rest);
        if !literal.is_empty() {
            segments.push(Segment::Literal(literal));
        }
        Self { segments }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn placeholders(&self) -> BTreeSet<&str> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Placeholder(p) => Some(p.as_str()),
                Segment::Literal(_) => None,
            })
            .collect()
    }

    /// Single-pass substitution: values are inserted verbatim and never
    /// re-scanned for placeholders.
    pub fn render(&self, inputs: &TemplateInputs) -> Result<String, ConversationError> {
        self.render_with(inputs, UnusedInputs::Warn)
    }

    pub fn render_with(
        &self,
        inputs: &TemplateInputs,
        unused: UnusedInputs,
    ) -> Result<String, ConversationError> {
        let used = self.placeholders();
        if let Some(extra) = inputs.keys().find(|k| !used.contains(k.as_str())) {
            match unused {
                UnusedInputs::Reject => {
                    return Err(ConversationError::UnknownPlaceholder(extra.clone()))
                }
                UnusedInputs::Warn => {
                    tracing::warn!(input = %extra, "template input not referenced by template")
                }
            }
        }
        let mut out = String::new();
        for segment in &self.segments {
            match segment {
                Segment::Literal(text) => out.push_str(text),
                Segment::Placeholder(name) => out.push_str(
                    inputs
                        .get(name)
                        .ok_or_else(|| ConversationError::MissingInput(name.clone()))?,
                ),
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_without_placeholders() {
        let text = "No inputs here, only text.\n";
        let t = PromptTemplate::parse(text);
        assert_eq!(t.render(&TemplateInputs::new()).unwrap(), text);
    }

    #[test]
    fn missing_input() {
        let t = PromptTemplate::parse("History:\n{messages}");
        assert!(matches!(
            t.render(&TemplateInputs::new()),
            Err(ConversationError::MissingInput(n)) if n == "messages"
        ));
    }

    #[test]
    fn finish_option_rendered() {
        let t = PromptTemplate::parse(
            "{messages}\n{steps_documentation}\nPick one of: {members_names} or FINISH.",
        );
        let out = t
            .render(&inputs([
                ("messages", "m"),
                ("steps_documentation", "d"),
                ("members_names", "A, B"),
            ]))
            .unwrap();
        assert!(out.contains("A, B or FINISH"));
    }

    #[test]
    fn single_pass_and_escapes() {
        let t = PromptTemplate::parse("{{literal}} {a} {not an ident} {\"json\": 1}");
        let out = t.render(&inputs([("a", "{b}")])).unwrap();
        assert_eq!(out, "{literal} {b} {not an ident} {\"json\": 1}");
    }

    #[test]
    fn strict_mode_rejects_unused() {
        let t = PromptTemplate::parse("{a}");
        let map = inputs([("a", "1"), ("zzz", "2")]);
        assert!(t.render(&map).is_ok());
        assert!(matches!(
            t.render_with(&map, UnusedInputs::Reject),
            Err(ConversationError::UnknownPlaceholder(n)) if n == "zzz"
        ));
    }
}
