//! Classifier example, prediction and vector files (JSON lines).
//!
//! - examples: `{"id", "input", "labels"?}`; `labels` is a list of tag ids
//! - predictions: `{"id", "labels", "scores"?}`; `scores` maps tag id to score
//! - transfer examples: `{"id", "input", "tag"}`
//! - vectors: `{"input", "vector"}` for the precomputed encoder

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use midas_core::classifier::{input_key, Example, PrecomputedEncoder};
use midas_core::swda::TransferExample;
use midas_core::{LabelSet, Taxonomy};
use serde::{Deserialize, Serialize};

use super::{parse_jsonl, read_text, FileError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleLine {
    pub id: String,
    pub input: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub id: String,
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<BTreeMap<String, f64>>,
}

#[derive(Deserialize)]
struct VectorLine {
    input: String,
    vector: Vec<f64>,
}

/// Every id must be unique.
fn unique_ids<'a>(origin: &str, ids: impl Iterator<Item = (usize, &'a str)>) -> Result<(), FileError> {
    let mut seen = BTreeSet::new();
    for (n, id) in ids {
        if !seen.insert(id) {
            return Err(FileError::parse(origin, n, format!("duplicate id `{id}`")));
        }
    }
    Ok(())
}

pub fn parse_example_lines(src: &str, origin: &str) -> Result<Vec<ExampleLine>, FileError> {
    let lines: Vec<(usize, ExampleLine)> = parse_jsonl(src, origin)?;
    unique_ids(origin, lines.iter().map(|(n, l)| (*n, l.id.as_str())))?;
    Ok(lines.into_iter().map(|(_, l)| l).collect())
}

pub fn read_example_lines(path: &Path) -> Result<Vec<ExampleLine>, FileError> {
    parse_example_lines(&read_text(path)?, &path.display().to_string())
}

/// Labeled training examples; every line must carry a valid label set.
pub fn parse_examples(src: &str, origin: &str, taxonomy: &Taxonomy) -> Result<Vec<(String, Example)>, FileError> {
    let lines: Vec<(usize, ExampleLine)> = parse_jsonl(src, origin)?;
    unique_ids(origin, lines.iter().map(|(n, l)| (*n, l.id.as_str())))?;
    lines
        .into_iter()
        .map(|(n, l)| {
            let tags = l.labels.ok_or_else(|| FileError::parse(origin, n, format!("example `{}` has no labels", l.id)))?;
            let labels = taxonomy.label_set(&tags).map_err(|e| FileError::parse(origin, n, e))?;
            Ok((l.id, Example { input: l.input, labels }))
        })
        .collect()
}

pub fn read_examples(path: &Path, taxonomy: &Taxonomy) -> Result<Vec<(String, Example)>, FileError> {
    parse_examples(&read_text(path)?, &path.display().to_string(), taxonomy)
}

/// Label sets by id from an example or prediction file; extra fields are
/// ignored.
pub fn parse_labels(src: &str, origin: &str, taxonomy: &Taxonomy) -> Result<BTreeMap<String, LabelSet>, FileError> {
    #[derive(Deserialize)]
    struct Line {
        id: String,
        labels: Vec<String>,
    }
    let lines: Vec<(usize, Line)> = parse_jsonl(src, origin)?;
    unique_ids(origin, lines.iter().map(|(n, l)| (*n, l.id.as_str())))?;
    lines
        .into_iter()
        .map(|(n, l)| {
            let set = taxonomy.label_set(&l.labels).map_err(|e| FileError::parse(origin, n, e))?;
            Ok((l.id, set))
        })
        .collect()
}

pub fn read_labels(path: &Path, taxonomy: &Taxonomy) -> Result<BTreeMap<String, LabelSet>, FileError> {
    parse_labels(&read_text(path)?, &path.display().to_string(), taxonomy)
}

pub fn parse_transfer_examples(src: &str, origin: &str) -> Result<Vec<TransferExample>, FileError> {
    let lines: Vec<(usize, TransferExample)> = parse_jsonl(src, origin)?;
    unique_ids(origin, lines.iter().map(|(n, l)| (*n, l.id.as_str())))?;
    Ok(lines.into_iter().map(|(_, l)| l).collect())
}

pub fn read_transfer_examples(path: &Path) -> Result<Vec<TransferExample>, FileError> {
    parse_transfer_examples(&read_text(path)?, &path.display().to_string())
}

/// All vectors must share one width.
pub fn parse_vectors(src: &str, origin: &str) -> Result<PrecomputedEncoder, FileError> {
    let lines: Vec<(usize, VectorLine)> = parse_jsonl(src, origin)?;
    let mut dim = None;
    let mut vectors = BTreeMap::new();
    for (n, l) in lines {
        let d = *dim.get_or_insert(l.vector.len());
        if l.vector.len() != d {
            return Err(FileError::parse(origin, n, format!("vector has width {}, expected {d}", l.vector.len())));
        }
        if l.vector.iter().any(|x| !x.is_finite()) {
            return Err(FileError::parse(origin, n, "vector holds a non-finite value"));
        }
        vectors.insert(input_key(&l.input), l.vector);
    }
    let dim = dim.ok_or_else(|| FileError::invalid(origin, "no vectors"))?;
    Ok(PrecomputedEncoder { dim, vectors })
}

pub fn read_vectors(path: &Path) -> Result<PrecomputedEncoder, FileError> {
    parse_vectors(&read_text(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples_need_valid_labels() {
        let tax = Taxonomy::builtin();
        let ok = r#"{"id":"a","input":"x <u_p> y <u_c> z","labels":["opening"]}"#;
        assert_eq!(parse_examples(ok, "e", &tax).unwrap()[0].1.labels.tags(), ["opening"]);
        let missing = r#"{"id":"a","input":"x"}"#;
        assert!(matches!(parse_examples(missing, "e", &tax), Err(FileError::Parse { line: 1, .. })));
        assert_eq!(parse_example_lines(missing, "e").unwrap()[0].labels, None);
        let bad = format!("{ok}\n{}", r#"{"id":"b","input":"x","labels":["comment","statement_non_opinion"]}"#);
        assert!(matches!(parse_examples(&bad, "e", &tax), Err(FileError::Parse { line: 2, .. })));
        let dup = format!("{ok}\n{ok}");
        assert!(matches!(parse_labels(&dup, "e", &tax), Err(FileError::Parse { line: 2, .. })));
    }

    #[test]
    fn vectors_share_width() {
        let e = parse_vectors("{\"input\":\"a\",\"vector\":[1,2]}\n{\"input\":\"b\",\"vector\":[3,4]}", "v").unwrap();
        assert_eq!(e.dim, 2);
        assert!(e.contains("a"));
        assert!(parse_vectors("{\"input\":\"a\",\"vector\":[1,2]}\n{\"input\":\"b\",\"vector\":[3]}", "v").is_err());
        assert!(parse_vectors("", "v").is_err());
    }
}
