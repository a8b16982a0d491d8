//! Model input rendering: `sys_unit <u_p> user_prev <u_c> user_cur`.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::corpus::{Conversation, Speaker};
use crate::taxonomy::LabelSet;

pub const USER_PREV_SEP: &str = "<u_p>";
pub const USER_CUR_SEP: &str = "<u_c>";
pub const EMPTY_TOKEN: &str = "<empty>";

/// The separator contract recorded in model bundles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Separators {
    pub user_prev: String,
    pub user_cur: String,
    pub empty: String,
}

impl Default for Separators {
    fn default() -> Self {
        Separators { user_prev: USER_PREV_SEP.into(), user_cur: USER_CUR_SEP.into(), empty: EMPTY_TOKEN.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    #[default]
    Text,
    Da,
    DaPlusText,
}

impl ContextMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "text" => Some(ContextMode::Text),
            "da" => Some(ContextMode::Da),
            "da_plus_text" | "da+text" => Some(ContextMode::DaPlusText),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContextError {
    #[error("segment `{0}` not found")]
    SegmentNotFound(String),
    #[error("segment `{0}` is not from a human turn")]
    NotHuman(String),
    #[error("segment `{0}` has no dialog-act labels")]
    MissingLabels(String),
    #[error("text contains a separator token: {0:?}")]
    SeparatorInText(String),
    #[error("rendered input is malformed")]
    Malformed,
}

/// Source of label sets for the dialog-act modes.
pub trait LabelLookup {
    fn labels(&self, segment_id: &str) -> Option<&LabelSet>;
}

impl LabelLookup for BTreeMap<String, LabelSet> {
    fn labels(&self, segment_id: &str) -> Option<&LabelSet> {
        self.get(segment_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextWindow {
    pub sys_unit: String,
    pub user_prev: String,
    pub user_cur: String,
}

impl ContextWindow {
    pub fn new(sys_unit: Option<&str>, user_prev: Option<&str>, user_cur: &str) -> Result<Self, ContextError> {
        let w = ContextWindow {
            sys_unit: sys_unit.unwrap_or(EMPTY_TOKEN).to_owned(),
            user_prev: user_prev.unwrap_or(EMPTY_TOKEN).to_owned(),
            user_cur: user_cur.to_owned(),
        };
        for field in [&w.sys_unit, &w.user_prev, &w.user_cur] {
            if field.contains(USER_PREV_SEP) || field.contains(USER_CUR_SEP) {
                return Err(ContextError::SeparatorInText(field.clone()));
            }
        }
        if w.user_cur.trim().is_empty() {
            return Err(ContextError::Malformed);
        }
        Ok(w)
    }

    pub fn render(&self) -> String {
        format!("{} {USER_PREV_SEP} {} {USER_CUR_SEP} {}", self.sys_unit, self.user_prev, self.user_cur)
    }

    /// Inverse of [`render`](Self::render).
    pub fn parse(rendered: &str) -> Result<Self, ContextError> {
        let (sys, rest) = rendered.split_once(&format!(" {USER_PREV_SEP} ")).ok_or(ContextError::Malformed)?;
        let (prev, cur) = rest.split_once(&format!(" {USER_CUR_SEP} ")).ok_or(ContextError::Malformed)?;
        Self::new(Some(sys), Some(prev), cur)
    }
}

fn slot(id: &str, text: &str, mode: ContextMode, labels: Option<&dyn LabelLookup>) -> Result<String, ContextError> {
    if mode == ContextMode::Text {
        return Ok(text.to_owned());
    }
    let l = labels.and_then(|l| l.labels(id)).ok_or_else(|| ContextError::MissingLabels(id.to_owned()))?;
    Ok(match mode {
        ContextMode::Da => l.joined(),
        _ => format!("{} {text}", l.joined()),
    })
}

/// Builds the window for a human segment: the last unit of the nearest
/// preceding machine turn, and the previous unit of the same turn. Missing
/// slots hold `<empty>`. In the dialog-act modes both context slots use the
/// labels of their segment.
pub fn context_window(
    conversation: &Conversation,
    segment_id: &str,
    mode: ContextMode,
    labels: Option<&dyn LabelLookup>,
) -> Result<ContextWindow, ContextError> {
    let at = conversation.find(segment_id).ok_or_else(|| ContextError::SegmentNotFound(segment_id.to_owned()))?;
    let cur = conversation.unit(at);
    if cur.speaker != Speaker::Human {
        return Err(ContextError::NotHuman(segment_id.to_owned()));
    }
    let sys = conversation.turns[..at.turn]
        .iter()
        .rev()
        .find(|t| t.speaker == Speaker::Machine && !t.units.is_empty())
        .map(|t| t.units.last().expect("non-empty"));
    let prev = at.unit.checked_sub(1).map(|k| &conversation.turns[at.turn].units[k]);

    let sys_text = sys.map(|u| slot(&u.id, &u.text, mode, labels)).transpose()?;
    let prev_text = prev.map(|u| slot(&u.id, &u.text, mode, labels)).transpose()?;
    ContextWindow::new(sys_text.as_deref(), prev_text.as_deref(), &cur.text)
}

pub fn build_context(
    conversation: &Conversation,
    segment_id: &str,
    mode: ContextMode,
    labels: Option<&dyn LabelLookup>,
) -> Result<String, ContextError> {
    context_window(conversation, segment_id, mode, labels).map(|w| w.render())
}
