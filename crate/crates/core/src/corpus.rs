//! Conversations, segment units and annotation records.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::taxonomy::{LabelError, LabelSet, Taxonomy};
use crate::text::{self, BOUNDARY_TOKEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Machine,
    Human,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentUnit {
    pub id: String,
    pub text: String,
    pub speaker: Speaker,
    pub index_in_turn: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub raw_text: String,
    pub units: Vec<SegmentUnit>,
}

impl Turn {
    /// Builds a turn whose units are numbered `{turn_id}.{k}`.
    pub fn from_units<S: AsRef<str>>(turn_id: &str, speaker: Speaker, raw_text: &str, units: &[S]) -> Self {
        let units = units
            .iter()
            .enumerate()
            .map(|(k, t)| SegmentUnit {
                id: alloc::format!("{turn_id}.{k}"),
                text: t.as_ref().to_owned(),
                speaker,
                index_in_turn: k,
            })
            .collect();
        Turn { speaker, raw_text: raw_text.to_owned(), units }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: String,
    pub turns: Vec<Turn>,
}

/// Position of a unit inside a conversation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitRef {
    pub turn: usize,
    pub unit: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("conversation `{0}` appears more than once")]
    DuplicateConversation(String),
    #[error("segment id `{0}` appears more than once")]
    DuplicateSegment(String),
    #[error("segment `{id}`: {reason}")]
    BadSegment { id: String, reason: String },
    #[error("conversation `{conversation}` turn {turn}: units do not reconstruct the raw text")]
    Reconstruction { conversation: String, turn: usize },
}

impl Conversation {
    pub fn find(&self, segment_id: &str) -> Option<UnitRef> {
        self.turns.iter().enumerate().find_map(|(ti, t)| {
            t.units.iter().position(|u| u.id == segment_id).map(|ui| UnitRef { turn: ti, unit: ui })
        })
    }

    pub fn unit(&self, r: UnitRef) -> &SegmentUnit {
        &self.turns[r.turn].units[r.unit]
    }

    pub fn units(&self) -> impl Iterator<Item = &SegmentUnit> {
        self.turns.iter().flat_map(|t| t.units.iter())
    }

    /// Checks unit-level invariants. Reconstruction of `raw_text` is checked
    /// after normalization, with boundary tokens removed.
    pub fn check(&self) -> Result<(), CorpusError> {
        for (ti, turn) in self.turns.iter().enumerate() {
            for (k, u) in turn.units.iter().enumerate() {
                let bad = |reason: &str| CorpusError::BadSegment { id: u.id.clone(), reason: reason.to_owned() };
                if u.text.trim().is_empty() {
                    return Err(bad("empty text"));
                }
                if u.text.contains(BOUNDARY_TOKEN) {
                    return Err(bad("text contains a boundary token"));
                }
                if u.index_in_turn != k {
                    return Err(bad("index_in_turn does not match position"));
                }
                if u.speaker != turn.speaker {
                    return Err(bad("speaker differs from its turn"));
                }
            }
            let raw = text::tokens(&turn.raw_text.replace(BOUNDARY_TOKEN, " "));
            let joined: Vec<String> = turn.units.iter().flat_map(|u| text::tokens(&u.text)).collect();
            if raw != joined {
                return Err(CorpusError::Reconstruction { conversation: self.id.clone(), turn: ti });
            }
        }
        Ok(())
    }
}

/// Checks corpus-wide id uniqueness plus each conversation's invariants.
pub fn check_corpus(conversations: &[Conversation]) -> Result<(), CorpusError> {
    let mut conv_ids = BTreeSet::new();
    let mut seg_ids = BTreeSet::new();
    for c in conversations {
        if !conv_ids.insert(c.id.as_str()) {
            return Err(CorpusError::DuplicateConversation(c.id.clone()));
        }
        for u in c.units() {
            if !seg_ids.insert(u.id.as_str()) {
                return Err(CorpusError::DuplicateSegment(u.id.clone()));
            }
        }
        c.check()?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub segment_id: String,
    pub annotator_id: String,
    pub labels: LabelSet,
    /// Annotator's manual ellipsis completion; never replaces the unit text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completed_text: Option<String>,
    /// Milliseconds since the Unix epoch.
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AttachError {
    #[error("unknown segment ids: {}", .0.join(", "))]
    Unresolved(Vec<String>),
    #[error("segment `{segment_id}` by `{annotator_id}`: {source}")]
    Labels { segment_id: String, annotator_id: String, source: LabelError },
}

/// Conversations plus the latest record per (segment, annotator).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnnotatedCorpus {
    pub conversations: Vec<Conversation>,
    pub annotations: BTreeMap<String, BTreeMap<String, AnnotationRecord>>,
}

impl AnnotatedCorpus {
    pub fn for_segment(&self, segment_id: &str) -> Option<&BTreeMap<String, AnnotationRecord>> {
        self.annotations.get(segment_id)
    }

    /// Latest label set per segment from one annotator.
    pub fn by_annotator(&self, annotator_id: &str) -> BTreeMap<String, LabelSet> {
        self.annotations
            .iter()
            .filter_map(|(seg, m)| m.get(annotator_id).map(|r| (seg.clone(), r.labels.clone())))
            .collect()
    }

    pub fn annotators(&self) -> BTreeSet<String> {
        self.annotations.values().flat_map(|m| m.keys().cloned()).collect()
    }
}

/// Joins annotation records onto conversations. Later records for the same
/// (segment, annotator) replace earlier ones.
pub fn attach_annotations(
    conversations: Vec<Conversation>,
    records: impl IntoIterator<Item = AnnotationRecord>,
    taxonomy: &Taxonomy,
) -> Result<AnnotatedCorpus, AttachError> {
    let known: BTreeSet<&str> = conversations.iter().flat_map(|c| c.units().map(|u| u.id.as_str())).collect();
    let records: Vec<AnnotationRecord> = records.into_iter().collect();
    let mut unresolved: Vec<String> = records
        .iter()
        .filter(|r| !known.contains(r.segment_id.as_str()))
        .map(|r| r.segment_id.clone())
        .collect();
    unresolved.sort();
    unresolved.dedup();
    if !unresolved.is_empty() {
        return Err(AttachError::Unresolved(unresolved));
    }
    let mut annotations: BTreeMap<String, BTreeMap<String, AnnotationRecord>> = BTreeMap::new();
    for r in records {
        taxonomy.check(&r.labels).map_err(|source| AttachError::Labels {
            segment_id: r.segment_id.clone(),
            annotator_id: r.annotator_id.clone(),
            source,
        })?;
        annotations.entry(r.segment_id.clone()).or_default().insert(r.annotator_id.clone(), r);
    }
    Ok(AnnotatedCorpus { conversations, annotations })
}
