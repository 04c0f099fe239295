//! Lexical retrieval over TRIZ source material.
//!
//! Documents are cut into overlapping character windows and ranked with
//! Okapi BM25. The tool returns the best passages with their sources; the
//! calling agent writes the prose answer.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use super::{Args, ParamKind, ParamSpec, Tool, ToolDescriptor, ToolError};
use crate::knowledge::KnowledgeBase;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;
pub const DEFAULT_RAG_K: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RagConfig {
    pub chunk_size: usize,
    pub overlap: usize,
}

impl Default for RagConfig {
    fn default() -> Self {
        Self {
            chunk_size: 800,
            overlap: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RagChunk {
    pub doc_id: String,
    pub chunk_index: usize,
    pub text: String,
    #[serde(default)]
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub doc_id: String,
    pub chars: usize,
    pub chunks: usize,
    pub tokens: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RagAnswer {
    pub context: String,
    pub chunks: Vec<RagChunk>,
}

#[derive(Debug, Error)]
pub enum RagError {
    #[error("document {0:?} is already in the store")]
    DuplicateDoc(String),
    #[error("document {0:?} has an empty body")]
    EmptyBody(String),
    #[error("the retrieval store is empty")]
    EmptyStore,
    #[error("query has no searchable terms")]
    EmptyQuery,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("invalid chunking: overlap {overlap} must be smaller than chunk size {chunk_size}")]
    BadConfig { chunk_size: usize, overlap: usize },
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Character spans `[start, end)` of the chunks of a text of `chars`.
///
/// Windows start every `chunk_size - overlap` characters; a further window
/// is opened while at least `overlap` characters remain past its start. A
/// window that starts inside a word moves back to the word start (by at
/// most `overlap`, and never onto an earlier window's start), and one that
/// ends inside a word ends at the last whitespace within its final
/// `overlap` characters instead.
pub fn chunk_spans(chars: &[char], cfg: RagConfig) -> Vec<(usize, usize)> {
    let len = chars.len();
    let stride = cfg.chunk_size - cfg.overlap;
    let ws = |i: usize| chars[i].is_whitespace();
    let mut spans: Vec<(usize, usize)> = Vec::new();
    let mut k = 0;
    loop {
        let grid = k * stride;
        if k > 0 && grid + cfg.overlap > len {
            break;
        }
        let mut start = grid;
        if start > 0 && start < len && !ws(start - 1) && !ws(start) {
            let floor = grid.saturating_sub(cfg.overlap);
            let mut s = start;
            while s > floor && !ws(s - 1) {
                s -= 1;
            }
            let past_prev = spans.last().is_none_or(|&(p, _)| s > p);
            if (s == 0 || ws(s - 1)) && past_prev {
                start = s;
            }
        }
        let mut end = (grid + cfg.chunk_size).min(len);
        if end < len && !ws(end - 1) && !ws(end) {
            let floor = end.saturating_sub(cfg.overlap).max(start);
            if let Some(p) = (floor + 1..end).rev().find(|&p| ws(p)) {
                end = p;
            }
        }
        spans.push((start, end));
        k += 1;
    }
    spans
}

/// BM25 score of every document for the given query terms.
pub fn bm25_scores(query_terms: &[String], docs: &[Vec<String>]) -> Vec<f64> {
    let n = docs.len() as f64;
    if docs.is_empty() {
        return Vec::new();
    }
    let avgdl = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let unique: Vec<&String> = {
        let mut seen = HashSet::new();
        query_terms.iter().filter(|t| seen.insert(*t)).collect()
    };
    let df: HashMap<&String, f64> = unique
        .iter()
        .map(|t| (*t, docs.iter().filter(|d| d.contains(t)).count() as f64))
        .collect();
    docs.iter()
        .map(|doc| {
            let dl = doc.len() as f64;
            unique
                .iter()
                .map(|t| {
                    let tf = doc.iter().filter(|w| w == t).count() as f64;
                    if tf == 0.0 {
                        return 0.0;
                    }
                    let nq = df[t];
                    let idf = ((n - nq + 0.5) / (nq + 0.5) + 1.0).ln();
                    let norm = if avgdl > 0.0 { dl / avgdl } else { 0.0 };
                    idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * (1.0 - BM25_B + BM25_B * norm))
                })
                .sum()
        })
        .collect()
}

/// In-memory chunk store. Serializable so an ingested corpus can be kept
/// on disk between CLI invocations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RagStore {
    config: RagConfig,
    docs: BTreeMap<String, usize>,
    chunks: Vec<RagChunk>,
}

impl RagStore {
    pub fn new(config: RagConfig) -> Result<Self, RagError> {
        if config.overlap >= config.chunk_size {
            return Err(RagError::BadConfig {
                chunk_size: config.chunk_size,
                overlap: config.overlap,
            });
        }
        Ok(Self {
            config,
            docs: BTreeMap::new(),
            chunks: Vec::new(),
        })
    }

    /// A store holding one document per TRIZ parameter and principle.
    pub fn seeded(kb: &KnowledgeBase, config: RagConfig) -> Result<Self, RagError> {
        let mut store = Self::new(config)?;
        for p in kb.parameters() {
            let id = format!("triz/parameters/{:02}", p.id.get());
            store.ingest(&id, &format!("TRIZ parameter {}: {}. {}", p.id, p.name, p.description))?;
        }
        for p in kb.principles() {
            let id = format!("triz/principles/{:02}", p.id.get());
            let mut body = format!("Inventive principle {}: {}. {}", p.id, p.name, p.description);
            for sub in &p.sub_principles {
                body.push_str("\n- ");
                body.push_str(sub);
            }
            store.ingest(&id, &body)?;
        }
        Ok(store)
    }

    pub fn config(&self) -> RagConfig {
        self.config
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn chunks(&self) -> &[RagChunk] {
        &self.chunks
    }

    pub fn ingest(&mut self, doc_id: &str, body: &str) -> Result<IngestStats, RagError> {
        if self.docs.contains_key(doc_id) {
            return Err(RagError::DuplicateDoc(doc_id.to_string()));
        }
        if body.trim().is_empty() {
            return Err(RagError::EmptyBody(doc_id.to_string()));
        }
        let chars: Vec<char> = body.chars().collect();
        let mut count = 0;
        for (start, end) in chunk_spans(&chars, self.config) {
            let text: String = chars[start..end].iter().collect();
            let text = text.trim();
            if text.is_empty() {
                continue;
            }
            self.chunks.push(RagChunk {
                doc_id: doc_id.to_string(),
                chunk_index: count,
                text: text.to_string(),
                score: 0.0,
            });
            count += 1;
        }
        self.docs.insert(doc_id.to_string(), chars.len());
        Ok(IngestStats {
            doc_id: doc_id.to_string(),
            chars: chars.len(),
            chunks: count,
            tokens: tokenize(body).len(),
        })
    }

    /// Ingests every `.md` and `.txt` file under `dir`; doc ids are paths
    /// relative to `dir` with `/` separators. Files are visited in sorted
    /// order so chunk numbering is stable.
    pub fn ingest_dir(&mut self, dir: &Path) -> Result<Vec<IngestStats>, RagError> {
        let io = |path: &Path, reason: String| RagError::Io {
            path: path.display().to_string(),
            reason,
        };
        if !dir.is_dir() {
            return Err(io(dir, "not a directory".into()));
        }
        let mut stats = Vec::new();
        for entry in WalkDir::new(dir).sort_by_file_name() {
            let entry = entry.map_err(|e| io(dir, e.to_string()))?;
            let path = entry.path();
            let wanted = path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("md") || e.eq_ignore_ascii_case("txt"));
            if !entry.file_type().is_file() || !wanted {
                continue;
            }
            let rel = path.strip_prefix(dir).unwrap_or(path);
            let doc_id = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            let body = std::fs::read_to_string(path).map_err(|e| io(path, e.to_string()))?;
            stats.push(self.ingest(&doc_id, &body)?);
        }
        Ok(stats)
    }

    /// Top-`k` chunks by BM25, ties broken by doc id then chunk index.
    /// Chunks that share no term with the query are left out.
    pub fn query(&self, query: &str, k: usize) -> Result<RagAnswer, RagError> {
        if k == 0 {
            return Err(RagError::ZeroK);
        }
        if self.chunks.is_empty() {
            return Err(RagError::EmptyStore);
        }
        let terms = tokenize(query);
        if terms.is_empty() {
            return Err(RagError::EmptyQuery);
        }
        let docs: Vec<Vec<String>> = self.chunks.iter().map(|c| tokenize(&c.text)).collect();
        let scores = bm25_scores(&terms, &docs);
        let mut ranked: Vec<RagChunk> = self
            .chunks
            .iter()
            .zip(scores)
            .filter(|(_, s)| *s > 0.0)
            .map(|(c, score)| RagChunk { score, ..c.clone() })
            .collect();
        ranked.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.doc_id.cmp(&b.doc_id))
                .then_with(|| a.chunk_index.cmp(&b.chunk_index))
        });
        ranked.truncate(k);
        let context = if ranked.is_empty() {
            "No matching passages found in the TRIZ sources.".to_string()
        } else {
            ranked
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    format!(
                        "[{}] source: {}#{} (score {:.3})\n{}",
                        i + 1,
                        c.doc_id,
                        c.chunk_index,
                        c.score,
                        c.text
                    )
                })
                .collect::<Vec<_>>()
                .join("\n\n")
        };
        Ok(RagAnswer {
            context,
            chunks: ranked,
        })
    }
}

pub struct RagTool {
    store: Arc<RwLock<RagStore>>,
    default_k: usize,
    descriptor: ToolDescriptor,
}

impl RagTool {
    pub fn new(store: Arc<RwLock<RagStore>>, default_k: usize) -> Self {
        Self {
            store,
            default_k,
            descriptor: ToolDescriptor {
                name: super::TRIZ_RAG.into(),
                description: "Retrieve passages from TRIZ source material relevant to a question."
                    .into(),
                parameters: vec![
                    ParamSpec::new("query", ParamKind::String, "Question or keywords", true),
                    ParamSpec::new("k", ParamKind::Integer, "Number of passages", false),
                ],
            },
        }
    }
}

impl Tool for RagTool {
    fn descriptor(&self) -> &ToolDescriptor {
        &self.descriptor
    }

    fn call(&self, args: &Args) -> Result<String, ToolError> {
        let query = args.str("query")?;
        let k = args.opt_uint("k")?.map(|k| k as usize).unwrap_or(self.default_k);
        let store = self.store.read().map_err(|_| ToolError::Failed("store unavailable".into()))?;
        store
            .query(query, k)
            .map(|a| a.context)
            .map_err(|e| match e {
                RagError::EmptyQuery => ToolError::field("query", e.to_string()),
                RagError::ZeroK => ToolError::field("k", e.to_string()),
                other => ToolError::Failed(other.to_string()),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spans_of(text: &str) -> Vec<(usize, usize)> {
        let chars: Vec<char> = text.chars().collect();
        chunk_spans(&chars, RagConfig::default())
    }

    #[test]
    fn stride_grid_without_whitespace() {
        let text = "x".repeat(2000);
        assert_eq!(
            spans_of(&text),
            vec![(0, 800), (600, 1400), (1200, 2000), (1800, 2000)]
        );
    }

    #[test]
    fn short_body_is_one_chunk() {
        assert_eq!(spans_of("a short body"), vec![(0, 12)]);
        assert_eq!(spans_of(&"y".repeat(799)).len(), 1);
    }

    #[test]
    fn windows_snap_to_word_edges() {
        let text = "abcdef ".repeat(300);
        let chars: Vec<char> = text.chars().collect();
        for (s, e) in chunk_spans(&chars, RagConfig::default()) {
            assert!(s == 0 || chars[s - 1].is_whitespace(), "start {s} inside a word");
            assert!(e == chars.len() || chars[e].is_whitespace() || chars[e - 1].is_whitespace());
            assert!(e - s <= 1000);
        }
    }

    #[test]
    fn ingest_errors() {
        let mut s = RagStore::new(RagConfig::default()).unwrap();
        assert!(matches!(s.query("x", 4), Err(RagError::EmptyStore)));
        s.ingest("a", "text").unwrap();
        assert!(matches!(s.ingest("a", "other"), Err(RagError::DuplicateDoc(_))));
        assert!(matches!(s.ingest("b", "  \n"), Err(RagError::EmptyBody(_))));
        assert!(matches!(s.query("!!", 4), Err(RagError::EmptyQuery)));
        assert!(RagStore::new(RagConfig { chunk_size: 10, overlap: 10 }).is_err());
    }

    #[test]
    fn exact_sentence_ranks_first() {
        let mut s = RagStore::new(RagConfig::default()).unwrap();
        s.ingest("a", "Segmentation divides an object into independent parts.").unwrap();
        s.ingest("b", "Feedback introduces a return signal to improve a process.").unwrap();
        s.ingest("c", "Dynamics lets characteristics of an object change to be optimal.").unwrap();
        let ans = s.query("Feedback introduces a return signal to improve a process.", 3).unwrap();
        assert_eq!(ans.chunks[0].doc_id, "b");
        assert!(ans.context.starts_with("[1] source: b#0"));
    }

    #[test]
    fn seeded_store_finds_principles() {
        let s = RagStore::seeded(&KnowledgeBase::bundled(), RagConfig::default()).unwrap();
        assert_eq!(s.doc_count(), 79);
        let ans = s.query("segmentation", 2).unwrap();
        assert_eq!(ans.chunks[0].doc_id, "triz/principles/01");
    }
}
