//! The bundled knowledge base against an independently laid out dense grid.

mod common;

use triz_agents::knowledge::{load_knowledge_base, KnowledgeBase, KnowledgeError};

/// Parses the dense grid: `Some(None)` diagonal, `Some(Some(vec))` cell.
fn oracle_grid() -> Vec<Vec<Option<Vec<u32>>>> {
    let text = std::fs::read_to_string(common::test_fixture("matrix_grid.txt")).unwrap();
    let rows: Vec<Vec<Option<Vec<u32>>>> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let (label, cells) = line.split_once(':').unwrap();
            assert_eq!(label, format!("r{:02}", i + 1));
            cells
                .split('|')
                .map(|c| match c.trim() {
                    "+" => None,
                    "-" => Some(Vec::new()),
                    ids => Some(ids.split_whitespace().map(|n| n.parse().unwrap()).collect()),
                })
                .collect()
        })
        .collect();
    assert_eq!(rows.len(), 39);
    assert!(rows.iter().all(|r| r.len() == 39));
    rows
}

#[test]
fn every_cell_matches_the_oracle() {
    let kb = KnowledgeBase::bundled();
    let grid = oracle_grid();
    let mut populated = 0;
    for i in 1..=39u32 {
        for w in 1..=39u32 {
            match &grid[i as usize - 1][w as usize - 1] {
                None => {
                    assert_eq!(i, w, "diagonal marker off the diagonal");
                    assert!(matches!(kb.lookup_matrix(i, w), Err(KnowledgeError::SameParameter(_))));
                }
                Some(expected) => {
                    let got: Vec<u32> = kb.lookup_matrix(i, w).unwrap().iter().map(|p| p.get()).collect();
                    assert_eq!(&got, expected, "cell ({i}, {w})");
                    populated += usize::from(!expected.is_empty());
                }
            }
        }
    }
    assert_eq!(populated, kb.matrix().populated_cells());
    assert_eq!(populated, 1248);
}

#[test]
fn counts_and_names() {
    let kb = KnowledgeBase::bundled();
    assert_eq!(kb.parameters().len(), 39);
    assert_eq!(kb.principles().len(), 40);
    assert_eq!(kb.parameters()[8].name, "Speed");
    assert_eq!(kb.principles()[39].name, "Composite materials");
    assert!(kb.principles().iter().all(|p| !p.description.is_empty()));
}

#[test]
fn data_dir_loads_the_same_base() {
    let kb = load_knowledge_base(&common::repo_root().join("data/triz")).unwrap();
    assert_eq!(kb.matrix(), KnowledgeBase::bundled().matrix());
}

#[test]
fn corrupt_data_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["parameters.tsv", "principles.tsv", "matrix.txt"] {
        std::fs::copy(common::repo_root().join("data/triz").join(f), dir.path().join(f)).unwrap();
    }
    let matrix = dir.path().join("matrix.txt");
    let mut text = std::fs::read_to_string(&matrix).unwrap();
    text.push_str("7,7:1,2\n");
    std::fs::write(&matrix, text).unwrap();
    assert!(load_knowledge_base(dir.path()).is_err());
    std::fs::remove_file(&matrix).unwrap();
    assert!(matches!(load_knowledge_base(dir.path()), Err(KnowledgeError::MissingFile(_))));
}
