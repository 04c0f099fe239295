//! TRIZ knowledge base: the 39 engineering parameters, the 40 inventive
//! principles and the classical contradiction matrix.
//!
//! The bundled data lives under `data/triz/` and is compiled into the
//! binary; [`load_knowledge_base`] reads the same three files from any
//! directory so edited copies can be used without rebuilding.
//!
//! File formats (UTF-8, one record per line, `#` starts a comment line):
//!
//! * `parameters.tsv`: `id<TAB>name<TAB>description`
//! * `principles.tsv`: `id<TAB>name<TAB>description<TAB>sub | sub | ...`
//! * `matrix.txt`: `improving,worsening:id,id,...` (empty cells omitted)

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PARAMETER_COUNT: usize = 39;
pub const PRINCIPLE_COUNT: usize = 40;

pub const PARAMETERS_FILE: &str = "parameters.tsv";
pub const PRINCIPLES_FILE: &str = "principles.tsv";
pub const MATRIX_FILE: &str = "matrix.txt";

const BUNDLED_PARAMETERS: &str = include_str!("../../../data/triz/parameters.tsv");
const BUNDLED_PRINCIPLES: &str = include_str!("../../../data/triz/principles.tsv");
const BUNDLED_MATRIX: &str = include_str!("../../../data/triz/matrix.txt");

/// Identifier of one of the 39 engineering parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterId(u8);

impl ParameterId {
    pub fn new(id: u32) -> Option<Self> {
        (1..=PARAMETER_COUNT as u32)
            .contains(&id)
            .then_some(Self(id as u8))
    }

    pub fn get(self) -> u32 {
        self.0 as u32
    }

    pub fn all() -> impl Iterator<Item = ParameterId> {
        (1..=PARAMETER_COUNT as u8).map(ParameterId)
    }
}

impl fmt::Display for ParameterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Identifier of one of the 40 inventive principles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrincipleId(u8);

impl PrincipleId {
    pub fn new(id: u32) -> Option<Self> {
        (1..=PRINCIPLE_COUNT as u32)
            .contains(&id)
            .then_some(Self(id as u8))
    }

    pub fn get(self) -> u32 {
        self.0 as u32
    }
}

impl fmt::Display for PrincipleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrizParameter {
    pub id: ParameterId,
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InventivePrinciple {
    pub id: PrincipleId,
    pub name: String,
    pub description: String,
    pub sub_principles: Vec<String>,
}

/// Sparse (improving, worsening) -> principle list table.
///
/// Empty cells and absent keys are the same thing: no entry.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContradictionMatrix {
    cells: BTreeMap<(ParameterId, ParameterId), Vec<PrincipleId>>,
}

impl ContradictionMatrix {
    pub fn get(&self, improving: ParameterId, worsening: ParameterId) -> &[PrincipleId] {
        self.cells
            .get(&(improving, worsening))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Number of cells holding at least one principle.
    pub fn populated_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((ParameterId, ParameterId), &[PrincipleId])> {
        self.cells.iter().map(|(k, v)| (*k, v.as_slice()))
    }
}

/// A contradiction where improving one parameter worsens another.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineeringContradiction {
    pub improving: ParameterId,
    pub worsening: ParameterId,
    pub rationale: String,
}

impl EngineeringContradiction {
    pub fn new(
        improving: ParameterId,
        worsening: ParameterId,
        rationale: impl Into<String>,
    ) -> Result<Self, KnowledgeError> {
        if improving == worsening {
            return Err(KnowledgeError::SameParameter(improving.get()));
        }
        Ok(Self {
            improving,
            worsening,
            rationale: rationale.into(),
        })
    }
}

/// A single parameter that must take opposing values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhysicalContradiction {
    pub parameter_name: String,
    pub contradictory_needs: String,
}

impl PhysicalContradiction {
    pub fn new(
        parameter_name: impl Into<String>,
        contradictory_needs: impl Into<String>,
    ) -> Result<Self, KnowledgeError> {
        let parameter_name = parameter_name.into();
        let contradictory_needs = contradictory_needs.into();
        if parameter_name.trim().is_empty() || contradictory_needs.trim().is_empty() {
            return Err(KnowledgeError::Validation(
                "physical contradiction needs a parameter name and contradictory needs".into(),
            ));
        }
        Ok(Self {
            parameter_name,
            contradictory_needs,
        })
    }
}

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("missing knowledge file: {0}")]
    MissingFile(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {reason}")]
    Parse {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("invalid knowledge base: {0}")]
    Validation(String),
    #[error("improving and worsening parameter are the same ({0})")]
    SameParameter(u32),
    #[error("unknown parameter: {0}")]
    UnknownParameter(String),
    #[error("unknown inventive principle: {0}")]
    UnknownPrinciple(u32),
}

/// Validated, immutable TRIZ knowledge base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    parameters: Vec<TrizParameter>,
    principles: Vec<InventivePrinciple>,
    matrix: ContradictionMatrix,
}

/// Reads `parameters.tsv`, `principles.tsv` and `matrix.txt` from `data_dir`.
pub fn load_knowledge_base(data_dir: &Path) -> Result<KnowledgeBase, KnowledgeError> {
    let read = |name: &str| -> Result<String, KnowledgeError> {
        let path = data_dir.join(name);
        if !path.is_file() {
            return Err(KnowledgeError::MissingFile(path));
        }
        std::fs::read_to_string(&path).map_err(|source| KnowledgeError::Io { path, source })
    };
    let parameters = read(PARAMETERS_FILE)?;
    let principles = read(PRINCIPLES_FILE)?;
    let matrix = read(MATRIX_FILE)?;
    KnowledgeBase::from_sources(&parameters, &principles, &matrix)
}

impl KnowledgeBase {
    /// The knowledge base compiled into the crate.
    pub fn bundled() -> Self {
        Self::from_sources(BUNDLED_PARAMETERS, BUNDLED_PRINCIPLES, BUNDLED_MATRIX)
            .expect("bundled TRIZ data is valid")
    }

    pub fn from_sources(
        parameters: &str,
        principles: &str,
        matrix: &str,
    ) -> Result<Self, KnowledgeError> {
        let parameters = parse_parameters(parameters)?;
        let principles = parse_principles(principles)?;
        let matrix = parse_matrix(matrix)?;
        Ok(Self {
            parameters,
            principles,
            matrix,
        })
    }

    /// All parameters, sorted by id.
    pub fn parameters(&self) -> &[TrizParameter] {
        &self.parameters
    }

    /// All principles, sorted by id.
    pub fn principles(&self) -> &[InventivePrinciple] {
        &self.principles
    }

    pub fn matrix(&self) -> &ContradictionMatrix {
        &self.matrix
    }

    pub fn parameter(&self, id: ParameterId) -> &TrizParameter {
        &self.parameters[id.0 as usize - 1]
    }

    pub fn principle(&self, id: PrincipleId) -> &InventivePrinciple {
        &self.principles[id.0 as usize - 1]
    }

    /// Principles recommended for an (improving, worsening) pair. An empty
    /// slice is a valid answer.
    pub fn lookup_matrix(
        &self,
        improving: u32,
        worsening: u32,
    ) -> Result<&[PrincipleId], KnowledgeError> {
        let i = ParameterId::new(improving)
            .ok_or_else(|| KnowledgeError::UnknownParameter(improving.to_string()))?;
        let w = ParameterId::new(worsening)
            .ok_or_else(|| KnowledgeError::UnknownParameter(worsening.to_string()))?;
        if i == w {
            return Err(KnowledgeError::SameParameter(improving));
        }
        Ok(self.matrix.get(i, w))
    }

    /// Full principle records in input order, duplicates preserved.
    pub fn principle_details(
        &self,
        ids: &[u32],
    ) -> Result<Vec<&InventivePrinciple>, KnowledgeError> {
        ids.iter()
            .map(|&id| {
                PrincipleId::new(id)
                    .map(|p| self.principle(p))
                    .ok_or(KnowledgeError::UnknownPrinciple(id))
            })
            .collect()
    }

    /// Resolves a numeric id or a canonical name (case-insensitive, exact).
    pub fn resolve_parameter(&self, key: &str) -> Result<ParameterId, KnowledgeError> {
        let key = key.trim();
        if let Ok(n) = key.parse::<u32>() {
            return ParameterId::new(n).ok_or_else(|| KnowledgeError::UnknownParameter(key.into()));
        }
        let wanted = key.to_lowercase();
        self.parameters
            .iter()
            .find(|p| p.name.to_lowercase() == wanted)
            .map(|p| p.id)
            .ok_or_else(|| KnowledgeError::UnknownParameter(key.into()))
    }

    /// "Did you mean" hints: parameters whose name contains a word of
    /// `fragment`, or has a word within edit distance 2 of one.
    pub fn parameter_candidates(&self, fragment: &str) -> Vec<&TrizParameter> {
        let fragment = fragment.trim().to_lowercase();
        let words: Vec<&str> = fragment.split_whitespace().collect();
        self.parameters
            .iter()
            .filter(|p| {
                let name = p.name.to_lowercase();
                words.iter().any(|w| {
                    name.contains(w)
                        || (w.chars().count() >= 4
                            && name
                                .split(|c: char| !c.is_alphanumeric())
                                .any(|n| strsim::levenshtein(n, w) <= 2))
                })
            })
            .collect()
    }
}

fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

fn parse_err(file: &str, line: usize, reason: impl Into<String>) -> KnowledgeError {
    KnowledgeError::Parse {
        file: file.to_string(),
        line,
        reason: reason.into(),
    }
}

fn parse_id(file: &str, line: usize, raw: &str) -> Result<u32, KnowledgeError> {
    raw.trim()
        .parse::<u32>()
        .map_err(|_| parse_err(file, line, format!("expected a numeric id, found {raw:?}")))
}

fn parse_parameters(text: &str) -> Result<Vec<TrizParameter>, KnowledgeError> {
    let mut by_id = BTreeMap::new();
    let mut names = HashSet::new();
    for (line, record) in records(text) {
        let fields: Vec<&str> = record.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(
                PARAMETERS_FILE,
                line,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let raw = parse_id(PARAMETERS_FILE, line, fields[0])?;
        let id = ParameterId::new(raw).ok_or_else(|| {
            KnowledgeError::Validation(format!("parameter id {raw} out of range 1..=39"))
        })?;
        let name = fields[1].trim().to_string();
        if name.is_empty() {
            return Err(KnowledgeError::Validation(format!("parameter {raw} has an empty name")));
        }
        if !names.insert(name.to_lowercase()) {
            return Err(KnowledgeError::Validation(format!("duplicate parameter name {name:?}")));
        }
        let param = TrizParameter {
            id,
            name,
            description: fields[2].trim().to_string(),
        };
        if by_id.insert(id, param).is_some() {
            return Err(KnowledgeError::Validation(format!("duplicate parameter id {raw}")));
        }
    }
    if by_id.len() != PARAMETER_COUNT {
        return Err(KnowledgeError::Validation(format!(
            "expected {PARAMETER_COUNT} parameters, found {}",
            by_id.len()
        )));
    }
    Ok(by_id.into_values().collect())
}

fn parse_principles(text: &str) -> Result<Vec<InventivePrinciple>, KnowledgeError> {
    let mut by_id = BTreeMap::new();
    for (line, record) in records(text) {
        let fields: Vec<&str> = record.split('\t').collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(parse_err(
                PRINCIPLES_FILE,
                line,
                format!("expected 3 or 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let raw = parse_id(PRINCIPLES_FILE, line, fields[0])?;
        let id = PrincipleId::new(raw).ok_or_else(|| {
            KnowledgeError::Validation(format!("principle id {raw} out of range 1..=40"))
        })?;
        let name = fields[1].trim().to_string();
        if name.is_empty() {
            return Err(KnowledgeError::Validation(format!("principle {raw} has an empty name")));
        }
        let sub_principles = fields
            .get(3)
            .map(|s| {
                s.split('|')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            })
            .unwrap_or_default();
        let principle = InventivePrinciple {
            id,
            name,
            description: fields[2].trim().to_string(),
            sub_principles,
        };
        if by_id.insert(id, principle).is_some() {
            return Err(KnowledgeError::Validation(format!("duplicate principle id {raw}")));
        }
    }
    if by_id.len() != PRINCIPLE_COUNT {
        return Err(KnowledgeError::Validation(format!(
            "expected {PRINCIPLE_COUNT} principles, found {}",
            by_id.len()
        )));
    }
    Ok(by_id.into_values().collect())
}

fn parse_matrix(text: &str) -> Result<ContradictionMatrix, KnowledgeError> {
    let mut cells = BTreeMap::new();
    let mut seen = HashSet::new();
    for (line, record) in records(text) {
        let (key, value) = record
            .split_once(':')
            .ok_or_else(|| parse_err(MATRIX_FILE, line, "expected `improving,worsening:ids`"))?;
        let (i, w) = key
            .split_once(',')
            .ok_or_else(|| parse_err(MATRIX_FILE, line, "expected `improving,worsening` key"))?;
        let (i, w) = (parse_id(MATRIX_FILE, line, i)?, parse_id(MATRIX_FILE, line, w)?);
        let improving = ParameterId::new(i).ok_or_else(|| {
            KnowledgeError::Validation(format!("line {line}: parameter id {i} out of range"))
        })?;
        let worsening = ParameterId::new(w).ok_or_else(|| {
            KnowledgeError::Validation(format!("line {line}: parameter id {w} out of range"))
        })?;
        if improving == worsening {
            return Err(KnowledgeError::Validation(format!(
                "line {line}: diagonal cell ({i},{i}) is not allowed"
            )));
        }
        if !seen.insert((improving, worsening)) {
            return Err(KnowledgeError::Validation(format!(
                "line {line}: cell ({i},{w}) listed twice"
            )));
        }
        let mut ids = Vec::new();
        for raw in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let n = parse_id(MATRIX_FILE, line, raw)?;
            let p = PrincipleId::new(n).ok_or_else(|| {
                KnowledgeError::Validation(format!("line {line}: principle id {n} out of range"))
            })?;
            ids.push(p);
        }
        if !ids.is_empty() {
            cells.insert((improving, worsening), ids);
        }
    }
    let full = PARAMETER_COUNT * (PARAMETER_COUNT - 1);
    if cells.len() >= full {
        return Err(KnowledgeError::Validation(
            "contradiction matrix has no empty cell".into(),
        ));
    }
    Ok(ContradictionMatrix { cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_cardinalities() {
        let kb = KnowledgeBase::bundled();
        assert_eq!(kb.parameters().len(), 39);
        assert_eq!(kb.principles().len(), 40);
        assert!(kb
            .parameters()
            .windows(2)
            .all(|w| w[0].id.get() + 1 == w[1].id.get()));
    }

    #[test]
    fn parameter_names_include_common_examples() {
        let kb = KnowledgeBase::bundled();
        let names: Vec<&str> = kb.parameters().iter().map(|p| p.name.as_str()).collect();
        for n in ["Speed", "Force", "Temperature"] {
            assert!(names.contains(&n), "{n} missing");
        }
    }

    #[test]
    fn same_parameter_is_rejected() {
        let kb = KnowledgeBase::bundled();
        for p in 1..=39 {
            assert!(matches!(
                kb.lookup_matrix(p, p),
                Err(KnowledgeError::SameParameter(x)) if x == p
            ));
        }
    }

    #[test]
    fn out_of_range_parameter() {
        let kb = KnowledgeBase::bundled();
        assert!(matches!(kb.lookup_matrix(0, 3), Err(KnowledgeError::UnknownParameter(_))));
        assert!(matches!(kb.lookup_matrix(3, 40), Err(KnowledgeError::UnknownParameter(_))));
    }

    #[test]
    fn principle_details_order_and_range() {
        let kb = KnowledgeBase::bundled();
        assert!(kb.principle_details(&[]).unwrap().is_empty());
        let got = kb.principle_details(&[40, 1]).unwrap();
        assert_eq!(got[0].id.get(), 40);
        assert_eq!(got[1].id.get(), 1);
        let dup = kb.principle_details(&[7, 7]).unwrap();
        assert_eq!(dup.len(), 2);
        assert!(matches!(
            kb.principle_details(&[3, 41]),
            Err(KnowledgeError::UnknownPrinciple(41))
        ));
    }

    #[test]
    fn resolve_is_case_insensitive_and_exact() {
        let kb = KnowledgeBase::bundled();
        assert_eq!(kb.resolve_parameter("speed").unwrap().get(), 9);
        assert_eq!(kb.resolve_parameter("FORCE").unwrap().get(), 10);
        assert_eq!(kb.resolve_parameter("13").unwrap().get(), 13);
        // near-miss names do not resolve
        assert!(kb.resolve_parameter("Stability").is_err());
        assert!(kb.resolve_parameter("Speed of object").is_err());
        assert!(!kb.parameter_candidates("Stability").is_empty());
        let typo: Vec<u32> = kb.parameter_candidates("spede").iter().map(|p| p.id.get()).collect();
        assert_eq!(typo, [9]);
    }

    #[test]
    fn diagonal_cell_is_a_validation_error() {
        let err = KnowledgeBase::from_sources(BUNDLED_PARAMETERS, BUNDLED_PRINCIPLES, "5,5:1,2\n")
            .unwrap_err();
        assert!(matches!(err, KnowledgeError::Validation(_)), "{err}");
    }

    #[test]
    fn parse_error_reports_line() {
        let err = KnowledgeBase::from_sources(
            BUNDLED_PARAMETERS,
            BUNDLED_PRINCIPLES,
            "# header\n1,3:15,8\n1,4 15\n",
        )
        .unwrap_err();
        assert!(matches!(err, KnowledgeError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn duplicate_and_range_violations() {
        let dup = format!("{BUNDLED_PARAMETERS}\n9\tSpeed again\tx\n");
        assert!(matches!(
            KnowledgeBase::from_sources(&dup, BUNDLED_PRINCIPLES, BUNDLED_MATRIX),
            Err(KnowledgeError::Validation(_))
        ));
        assert!(matches!(
            KnowledgeBase::from_sources(BUNDLED_PARAMETERS, BUNDLED_PRINCIPLES, "1,3:41\n"),
            Err(KnowledgeError::Validation(_))
        ));
        assert!(matches!(
            KnowledgeBase::from_sources(BUNDLED_PARAMETERS, BUNDLED_PRINCIPLES, "1,40:2\n"),
            Err(KnowledgeError::Validation(_))
        ));
    }

    #[test]
    fn contradiction_constructors() {
        let a = ParameterId::new(9).unwrap();
        let b = ParameterId::new(13).unwrap();
        assert!(EngineeringContradiction::new(a, b, "faster moves shake the load").is_ok());
        assert!(EngineeringContradiction::new(a, a, "").is_err());
        assert!(PhysicalContradiction::new("Speed", "").is_err());
    }
}
