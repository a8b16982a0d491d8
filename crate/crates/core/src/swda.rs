//! Switchboard (SWBD-DAMSL) to MIDAS tag mapping and single-label transfer
//! example extraction.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::context::ContextWindow;
use crate::taxonomy::Taxonomy;
use crate::text;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapTarget {
    Tag(String),
    /// Not applicable to the target scheme; utterances are discarded.
    Drop,
    /// No automatic mapping exists; handled by [`UnresolvedPolicy`].
    Unresolved,
}

impl MapTarget {
    pub fn as_str(&self) -> &str {
        match self {
            MapTarget::Tag(t) => t,
            MapTarget::Drop => "DROP",
            MapTarget::Unresolved => "UNRESOLVED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingRule {
    /// Member act codes, e.g. `["ng", "nn^e"]`.
    pub codes: Vec<String>,
    pub target: MapTarget,
    /// Name of the source tag group in the standard 42-group clustering.
    pub cluster: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SwdaError {
    #[error("unknown SWBD-DAMSL tag `{0}`")]
    UnknownTag(String),
    #[error("act code `{0}` appears in more than one rule")]
    DuplicateCode(String),
    #[error("rule `{codes}` targets `{target}`, which is not a tag")]
    BadTarget { codes: String, target: String },
    #[error("{transcript} utterance {index}: {source}")]
    At { transcript: String, index: usize, source: alloc::boxed::Box<SwdaError> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingTable {
    rules: Vec<MappingRule>,
    by_code: BTreeMap<String, usize>,
}

impl MappingTable {
    /// Validates rules: codes unique, tag targets resolved through the
    /// taxonomy (aliases and display spellings accepted).
    pub fn new(mut rules: Vec<MappingRule>, taxonomy: &Taxonomy) -> Result<Self, SwdaError> {
        let mut by_code = BTreeMap::new();
        for (i, rule) in rules.iter_mut().enumerate() {
            if let MapTarget::Tag(t) = &rule.target {
                let id = taxonomy.resolve(t).ok_or_else(|| SwdaError::BadTarget {
                    codes: rule.codes.join(","),
                    target: t.clone(),
                })?;
                rule.target = MapTarget::Tag(id.to_owned());
            }
            for code in &rule.codes {
                if by_code.insert(code.clone(), i).is_some() {
                    return Err(SwdaError::DuplicateCode(code.clone()));
                }
            }
        }
        Ok(MappingTable { rules, by_code })
    }

    pub fn builtin(taxonomy: &Taxonomy) -> Self {
        Self::new(builtin_rules(), taxonomy).expect("built-in mapping resolves")
    }

    pub fn rules(&self) -> &[MappingRule] {
        &self.rules
    }

    pub fn map_tag(&self, code: &str) -> Result<&MapTarget, SwdaError> {
        self.by_code
            .get(code.trim())
            .map(|&i| &self.rules[i].target)
            .ok_or_else(|| SwdaError::UnknownTag(code.trim().to_owned()))
    }
}

// (description, codes, target, cluster); target "" = DROP, "?" = UNRESOLVED
const BUILTIN_RULES: &[(&str, &str, &str, &str)] = &[
    ("statement_non-opinion", "sd", "statement non_opinion", "sd"),
    ("Acknowledge (Backchannel)", "b", "back-channeling", "b"),
    ("Statement-opinion", "sv", "general opinion", "sv"),
    ("Agree/Accept", "aa", "pos answer", "aa"),
    ("Abandoned or Turn-Exit", "%-", "abandon", "%"),
    ("Appreciation", "ba", "appreciation", "ba"),
    ("Yes-No-Question", "qy", "yes-no question", "qy"),
    ("Non-verbal", "x", "", "x"),
    ("Yes answers", "ny", "pos answer", "ny"),
    ("Conventional-closing", "fc", "closing", "fc"),
    ("Uninterpretable", "%", "abandon", "%"),
    ("Wh-Question", "qw", "?", "qw"),
    ("No answers", "nn", "neg answer", "nn"),
    ("Response Acknowledgement", "bk", "back-channeling", "bk"),
    ("Hedge", "h", "other answers", "h"),
    ("Declarative Yes-No-Question", "qy^d", "yes-no question", "qy^d"),
    ("Other", "o,fo,bc,by,fw", "other", "fo_o_fw_\"_by_bc"),
    ("Backchannel in question form", "bh", "back-channeling", "bh"),
    ("Quotation", "^q", "other opinion", "^q"),
    ("Summarize/reformulate", "bf", "other opinion", "bf"),
    ("Affirmative non-yes answers", "na,ny^e", "pos answer", "na"),
    ("Action-directive", "ad", "task command", "ad"),
    ("Collaborative Completion", "^2", "general opinion", "^2"),
    ("Repeat-phrase", "b^m", "general opinion", "b^m"),
    ("Open-Question", "qo", "?", "qo"),
    ("Rhetorical-Questions", "qh", "?", "qh"),
    ("Hold before answer/agreement", "^h", "hold", "^h"),
    ("Reject", "ar", "neg answer", "ar"),
    ("Negative non-no answers", "ng,nn^e", "neg answer", "ng"),
    ("Signal-non-understanding", "br", "complaint", "br"),
    ("other_answers", "no", "other answer", "no"),
    ("Conventional-opening", "fp", "opening", "fp"),
    ("Or-Clause", "qrr", "other", "qrr"),
    ("Dispreferred answers", "arp,nd", "neg answer", "arp_nd"),
    ("3rd-party-talk", "t3", "", "t3"),
    ("Offers, Options Commits", "oo,cc,co", "other", "oo_co_cc"),
    ("Self-talk", "t1", "other", "t1"),
    ("Downplayer", "bd", "apology response", "bd"),
    ("Maybe/Accept-part", "aap,am", "pos answer", "aap_am"),
    ("Tag-Question", "^g", "other", "^g"),
    ("Declarative Wh-Question", "qw^d", "?", "qw^d"),
    ("Apology", "fa", "apology", "fa"),
    ("Thanking", "ft", "thanking", "ft"),
];

pub fn builtin_rules() -> Vec<MappingRule> {
    BUILTIN_RULES
        .iter()
        .map(|&(description, codes, target, cluster)| MappingRule {
            codes: codes.split(',').map(|c| c.trim().to_owned()).collect(),
            target: match target {
                "" => MapTarget::Drop,
                "?" => MapTarget::Unresolved,
                t => MapTarget::Tag(t.to_owned()),
            },
            cluster: cluster.to_owned(),
            description: description.to_owned(),
        })
        .collect()
}

/// Strips non-verbal `<...>` markers and punctuation (apostrophes kept),
/// lowercases, collapses whitespace. `None` if nothing remains.
pub fn preprocess_utterance(raw: &str) -> Option<String> {
    let t = text::normalize(&text::strip_angle_markers(raw));
    (!t.is_empty()).then_some(t)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwdaUtterance {
    pub speaker: String,
    pub act_tag: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwdaTranscript {
    pub id: String,
    pub utterances: Vec<SwdaUtterance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "tag")]
pub enum UnresolvedPolicy {
    #[default]
    Drop,
    MapTo(String),
}

/// A rendered single-label training example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferExample {
    /// `{transcript}:{utterance index}`
    pub id: String,
    pub input: String,
    pub tag: String,
}

/// Maps and renders every usable utterance. The other speaker's latest
/// utterance fills the system slot; the same speaker's previous utterance,
/// when it directly precedes in the same run, fills the previous-user slot.
/// Dropped utterances still serve as context.
pub fn build_transfer_set(
    transcripts: &[SwdaTranscript],
    table: &MappingTable,
    policy: &UnresolvedPolicy,
    taxonomy: &Taxonomy,
) -> Result<Vec<TransferExample>, SwdaError> {
    if let UnresolvedPolicy::MapTo(t) = policy {
        if taxonomy.tag(t).is_none() {
            return Err(SwdaError::BadTarget { codes: "UNRESOLVED".into(), target: t.clone() });
        }
    }
    let mut out = Vec::new();
    for tr in transcripts {
        let texts: Vec<Option<String>> = tr.utterances.iter().map(|u| preprocess_utterance(&u.text)).collect();
        for (k, u) in tr.utterances.iter().enumerate() {
            let target = table.map_tag(&u.act_tag).map_err(|e| SwdaError::At {
                transcript: tr.id.clone(),
                index: k,
                source: alloc::boxed::Box::new(e),
            })?;
            let tag = match (target, policy) {
                (MapTarget::Tag(t), _) => t.clone(),
                (MapTarget::Unresolved, UnresolvedPolicy::MapTo(t)) => t.clone(),
                _ => continue,
            };
            let Some(cur) = &texts[k] else { continue };
            let sys = (0..k).rev().find(|&j| tr.utterances[j].speaker != u.speaker && texts[j].is_some());
            let prev = (0..k)
                .rev()
                .take_while(|&j| tr.utterances[j].speaker == u.speaker)
                .find(|&j| texts[j].is_some());
            let window = ContextWindow::new(
                sys.and_then(|j| texts[j].as_deref()),
                prev.and_then(|j| texts[j].as_deref()),
                cur,
            )
            .expect("normalized text holds no separators");
            out.push(TransferExample { id: format!("{}:{k}", tr.id), input: window.render(), tag });
        }
    }
    Ok(out)
}
