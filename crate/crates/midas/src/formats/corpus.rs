//! Corpus files and annotation logs.
//!
//! A corpus file holds one conversation per line:
//!
//! ```json
//! {"schema_version":1,"id":"c1","turns":[{"speaker":"machine","raw_text":"...","units":[
//!   {"id":"c1:0.0","text":"...","speaker":"machine","index_in_turn":0}]}]}
//! ```
//!
//! An exported annotated corpus adds an `annotations` array to each line with
//! the latest record per (segment, annotator). An annotation log holds one
//! record per line and is only ever appended to.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use midas_core::corpus::{attach_annotations, check_corpus, AnnotatedCorpus, AnnotationRecord, Conversation, Turn};
use midas_core::Taxonomy;
use serde::{Deserialize, Serialize};

use super::{parse_jsonl, read_text, render_jsonl, write_text, FileError, SCHEMA_VERSION};

#[derive(Serialize, Deserialize)]
struct ConversationLine {
    schema_version: u32,
    id: String,
    turns: Vec<Turn>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    annotations: Vec<AnnotationRecord>,
}

#[derive(Serialize, Deserialize)]
struct LogLine {
    schema_version: u32,
    #[serde(flatten)]
    record: AnnotationRecord,
}

fn check_version(origin: &str, line: usize, v: u32) -> Result<(), FileError> {
    if v == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(FileError::parse(origin, line, format!("unsupported schema_version {v}")))
    }
}

fn parse_lines(src: &str, origin: &str) -> Result<Vec<ConversationLine>, FileError> {
    let lines: Vec<(usize, ConversationLine)> = parse_jsonl(src, origin)?;
    let mut seen = BTreeSet::new();
    for (n, l) in &lines {
        check_version(origin, *n, l.schema_version)?;
        if !seen.insert(l.id.clone()) {
            return Err(FileError::parse(origin, *n, format!("duplicate conversation id `{}`", l.id)));
        }
    }
    let lines: Vec<ConversationLine> = lines.into_iter().map(|(_, l)| l).collect();
    let convs: Vec<Conversation> =
        lines.iter().map(|l| Conversation { id: l.id.clone(), turns: l.turns.clone() }).collect();
    check_corpus(&convs).map_err(|e| FileError::invalid(origin, e))?;
    Ok(lines)
}

/// Conversations only; any embedded annotations are ignored.
pub fn parse_corpus(src: &str, origin: &str) -> Result<Vec<Conversation>, FileError> {
    Ok(parse_lines(src, origin)?.into_iter().map(|l| Conversation { id: l.id, turns: l.turns }).collect())
}

pub fn read_corpus(path: &Path) -> Result<Vec<Conversation>, FileError> {
    parse_corpus(&read_text(path)?, &path.display().to_string())
}

pub fn render_corpus(conversations: &[Conversation]) -> String {
    render_jsonl(conversations.iter().map(|c| ConversationLine {
        schema_version: SCHEMA_VERSION,
        id: c.id.clone(),
        turns: c.turns.clone(),
        annotations: Vec::new(),
    }))
}

pub fn write_corpus(path: &Path, conversations: &[Conversation]) -> Result<(), FileError> {
    write_text(path, &render_corpus(conversations))
}

/// Conversations with their embedded annotations, re-validated.
pub fn parse_annotated(src: &str, origin: &str, taxonomy: &Taxonomy) -> Result<AnnotatedCorpus, FileError> {
    let lines = parse_lines(src, origin)?;
    let mut convs = Vec::with_capacity(lines.len());
    let mut records = Vec::new();
    for l in lines {
        records.extend(l.annotations);
        convs.push(Conversation { id: l.id, turns: l.turns });
    }
    attach_annotations(convs, records, taxonomy).map_err(|e| FileError::invalid(origin, e))
}

pub fn read_annotated(path: &Path, taxonomy: &Taxonomy) -> Result<AnnotatedCorpus, FileError> {
    parse_annotated(&read_text(path)?, &path.display().to_string(), taxonomy)
}

/// Each conversation line carries the records on its units, in unit order
/// then annotator order.
pub fn render_annotated(corpus: &AnnotatedCorpus) -> String {
    render_jsonl(corpus.conversations.iter().map(|c| {
        let annotations = c
            .units()
            .filter_map(|u| corpus.annotations.get(&u.id))
            .flat_map(|m: &BTreeMap<String, AnnotationRecord>| m.values().cloned())
            .collect();
        ConversationLine { schema_version: SCHEMA_VERSION, id: c.id.clone(), turns: c.turns.clone(), annotations }
    }))
}

pub fn write_annotated(path: &Path, corpus: &AnnotatedCorpus) -> Result<(), FileError> {
    write_text(path, &render_annotated(corpus))
}

/// One log line, newline included.
pub fn render_log_record(record: &AnnotationRecord) -> String {
    let mut s = serde_json::to_string(&LogLine { schema_version: SCHEMA_VERSION, record: record.clone() })
        .expect("serializable");
    s.push('\n');
    s
}

/// Every record in file order. Label sets are re-validated.
pub fn parse_log(src: &str, origin: &str, taxonomy: &Taxonomy) -> Result<Vec<AnnotationRecord>, FileError> {
    let lines: Vec<(usize, LogLine)> = parse_jsonl(src, origin)?;
    lines
        .into_iter()
        .map(|(n, l)| {
            check_version(origin, n, l.schema_version)?;
            taxonomy.check(&l.record.labels).map_err(|e| FileError::parse(origin, n, e))?;
            Ok(l.record)
        })
        .collect()
}

/// A missing log is an empty log.
pub fn read_log(path: &Path, taxonomy: &Taxonomy) -> Result<Vec<AnnotationRecord>, FileError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    parse_log(&read_text(path)?, &path.display().to_string(), taxonomy)
}
