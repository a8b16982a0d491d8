//! Raw conversations to a segmented corpus.
//!
//! Raw input is JSON lines of `{"id", "turns": [{"speaker", "text"}]}`. Text
//! is normalized; `.`, `!`, `?` and `[SEG]` split units. With a segmenter
//! model, human units are split further at predicted boundaries, which is how
//! unpunctuated ASR text gets segmented.

use std::collections::BTreeSet;
use std::path::Path;

use midas_core::corpus::{check_corpus, Conversation, Speaker, Turn};
use midas_core::segmenter::{reformat, SegmenterModel};
use serde::Deserialize;

use crate::formats::{parse_jsonl, read_text, FileError};

#[derive(Debug, Clone, Deserialize)]
pub struct RawTurn {
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RawConversation {
    pub id: String,
    pub turns: Vec<RawTurn>,
}

pub fn parse_raw(src: &str, origin: &str) -> Result<Vec<RawConversation>, FileError> {
    let lines: Vec<(usize, RawConversation)> = parse_jsonl(src, origin)?;
    let mut seen = BTreeSet::new();
    for (n, c) in &lines {
        if !seen.insert(c.id.as_str()) {
            return Err(FileError::parse(origin, *n, format!("duplicate conversation id `{}`", c.id)));
        }
    }
    Ok(lines.into_iter().map(|(_, c)| c).collect())
}

pub fn read_raw(path: &Path) -> Result<Vec<RawConversation>, FileError> {
    parse_raw(&read_text(path)?, &path.display().to_string())
}

/// Units of one turn. Text that normalizes to nothing gives no units.
pub fn segment_turn(speaker: Speaker, text: &str, segmenter: Option<&SegmenterModel>) -> Vec<String> {
    let Ok(ex) = reformat(text) else { return Vec::new() };
    let units = ex.units();
    match (speaker, segmenter) {
        (Speaker::Human, Some(m)) => units.iter().flat_map(|u| m.segment(u)).collect(),
        _ => units,
    }
}

/// Unit ids are `{conversation}:{turn}.{k}`.
pub fn ingest(raw: &[RawConversation], segmenter: Option<&SegmenterModel>) -> Result<Vec<Conversation>, String> {
    let out: Vec<Conversation> = raw
        .iter()
        .map(|c| Conversation {
            id: c.id.clone(),
            turns: c
                .turns
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let units = segment_turn(t.speaker, &t.text, segmenter);
                    Turn::from_units(&format!("{}:{i}", c.id), t.speaker, &t.text, &units)
                })
                .collect(),
        })
        .collect();
    check_corpus(&out).map_err(|e| e.to_string())?;
    Ok(out)
}
