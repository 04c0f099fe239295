//! Step documents and the final report, rendered as markdown with a small
//! front-matter block.

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::ConversationError;

/// Front-matter key whose value changes between otherwise identical runs.
pub const TIMESTAMP_KEY: &str = "created_at";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepDocument {
    pub step: u32,
    pub title: String,
    pub body: String,
    pub produced_by: String,
    pub created_at: DateTime<Utc>,
    /// Set when the step hit its node-call cap before the team finished.
    pub truncated: bool,
}

impl StepDocument {
    pub fn new(
        step: u32,
        title: impl Into<String>,
        body: impl Into<String>,
        produced_by: impl Into<String>,
        created_at: DateTime<Utc>,
    ) -> Result<Self, ConversationError> {
        let body = body.into();
        if body.trim().is_empty() {
            return Err(ConversationError::EmptyDocument(step));
        }
        Ok(Self {
            step,
            title: title.into(),
            body,
            produced_by: produced_by.into(),
            created_at,
            truncated: false,
        })
    }

    pub fn file_name(&self) -> String {
        format!("step_{}.md", self.step)
    }

    pub fn to_markdown(&self) -> String {
        format!(
            "---\nstep: {}\ntitle: {}\nproduced_by: {}\n{TIMESTAMP_KEY}: {}\ntruncated: {}\n---\n\n# Step {}: {}\n\n{}\n",
            self.step,
            self.title,
            self.produced_by,
            timestamp(&self.created_at),
            self.truncated,
            self.step,
            self.title,
            self.body.trim_end(),
        )
    }

    /// Parses what [`StepDocument::to_markdown`] wrote.
    pub fn from_markdown(text: &str) -> Result<Self, ConversationError> {
        let (fields, content) = split_front_matter(text)?;
        let get = |key: &str| {
            fields
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| ConversationError::Parse {
                    line: 1,
                    reason: format!("front matter lacks `{key}`"),
                })
        };
        let step: u32 = get("step")?.parse().map_err(|_| ConversationError::Parse {
            line: 2,
            reason: "step is not a number".into(),
        })?;
        let title = get("title")?.to_string();
        let created_at = DateTime::parse_from_rfc3339(get(TIMESTAMP_KEY)?)
            .map_err(|e| ConversationError::Parse {
                line: 5,
                reason: format!("bad timestamp: {e}"),
            })?
            .with_timezone(&Utc);
        let heading = format!("# Step {step}: {title}\n\n");
        let body = content
            .trim_start_matches('\n')
            .strip_prefix(&heading)
            .unwrap_or(content)
            .trim_end_matches('\n')
            .to_string();
        let mut doc = Self::new(step, title, body, get("produced_by")?, created_at)?;
        doc.truncated = get("truncated")? == "true";
        Ok(doc)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalReport {
    pub body: String,
    pub source_docs: Vec<u32>,
    pub produced_by: String,
    pub created_at: DateTime<Utc>,
}

pub const FINAL_REPORT_FILE: &str = "final_report.md";

impl FinalReport {
    /// `steps` are the workflow's step ids; the report must cite each once.
    pub fn new(
        body: impl Into<String>,
        source_docs: Vec<u32>,
        steps: &[u32],
        produced_by: impl Into<String>,
        created_at: DateTime<Utc>,
    ) -> Result<Self, ConversationError> {
        let body = body.into();
        if body.trim().is_empty() {
            return Err(ConversationError::EmptyDocument(0));
        }
        let mut sorted = source_docs.clone();
        sorted.sort_unstable();
        let mut expected = steps.to_vec();
        expected.sort_unstable();
        if sorted != expected {
            return Err(ConversationError::InvalidMessage(format!(
                "final report must cite steps {expected:?} once each, got {source_docs:?}"
            )));
        }
        Ok(Self {
            body,
            source_docs,
            produced_by: produced_by.into(),
            created_at,
        })
    }

    pub fn to_markdown(&self) -> String {
        let sources: Vec<String> = self.source_docs.iter().map(u32::to_string).collect();
        format!(
            "---\nsource_docs: [{}]\nproduced_by: {}\n{TIMESTAMP_KEY}: {}\n---\n\n# Final Report\n\n{}\n",
            sources.join(", "),
            self.produced_by,
            timestamp(&self.created_at),
            self.body.trim_end(),
        )
    }
}

fn timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

type FrontMatter<'a> = (Vec<(&'a str, &'a str)>, &'a str);

fn split_front_matter(text: &str) -> Result<FrontMatter<'_>, ConversationError> {
    let rest = text.strip_prefix("---\n").ok_or(ConversationError::Parse {
        line: 1,
        reason: "missing front matter".into(),
    })?;
    let end = rest.find("\n---\n").ok_or(ConversationError::Parse {
        line: 1,
        reason: "unterminated front matter".into(),
    })?;
    let fields = rest[..end]
        .lines()
        .filter_map(|l| l.split_once(':'))
        .map(|(k, v)| (k.trim(), v.trim()))
        .collect();
    Ok((fields, &rest[end + 5..]))
}

/// Replaces the value of every timestamp line so two renderings of the
/// same run compare equal.
pub fn mask_timestamps(text: &str) -> String {
    let prefix = format!("{TIMESTAMP_KEY}:");
    let mut out = String::with_capacity(text.len());
    for line in text.split_inclusive('\n') {
        if line.starts_with(&prefix) {
            out.push_str(&prefix);
            out.push_str(" <masked>");
            if line.ends_with('\n') {
                out.push('\n');
            }
        } else {
            out.push_str(line);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn at(secs: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(secs, 0).unwrap()
    }

    #[test]
    fn markdown_round_trip() {
        let mut doc = StepDocument::new(
            3,
            "Cause and Effect Chain Analysis (CECA)",
            "Root cause: operators push speed.\n\n- overheating\n- swing",
            "DocumentationSpecialist",
            at(1_700_000_000),
        )
        .unwrap();
        doc.truncated = true;
        let md = doc.to_markdown();
        assert!(md.contains("created_at: 2023-11-14T22:13:20Z"));
        assert_eq!(StepDocument::from_markdown(&md).unwrap(), doc);
    }

    #[test]
    fn empty_body_rejected() {
        assert!(StepDocument::new(1, "t", "  ", "DocumentationSpecialist", at(0)).is_err());
    }

    #[test]
    fn final_report_cites_every_step_once() {
        let steps = [1, 2, 3, 4, 5, 6];
        assert!(FinalReport::new("r", vec![1, 2, 3, 4, 5, 6], &steps, "D", at(0)).is_ok());
        assert!(FinalReport::new("r", vec![1, 2, 3, 4, 5], &steps, "D", at(0)).is_err());
        assert!(FinalReport::new("r", vec![1, 1, 2, 3, 4, 5, 6], &steps, "D", at(0)).is_err());
    }

    #[test]
    fn masking_hides_only_timestamps() {
        let a = StepDocument::new(1, "T", "body", "D", at(0)).unwrap();
        let b = StepDocument { created_at: at(99_999), ..a.clone() };
        assert_ne!(a.to_markdown(), b.to_markdown());
        assert_eq!(mask_timestamps(&a.to_markdown()), mask_timestamps(&b.to_markdown()));
        let c = StepDocument { body: "other".into(), ..a.clone() };
        assert_ne!(mask_timestamps(&a.to_markdown()), mask_timestamps(&c.to_markdown()));
    }
}
