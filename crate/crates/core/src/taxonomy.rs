//! The two-tree dialog-act scheme and the rules that decide which label sets
//! are legal.
//!
//! The scheme is a forest of two trees (semantic request, functional request).
//! Interior nodes are types, classes, categories and subcategories; the 23
//! leaves are the tags annotators and models emit. Interior node names and tag
//! ids live in separate namespaces, so a category and its single tag may share
//! a name (`statement_non_opinion`, `other`).

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Maximum number of tags a segment may carry.
pub const MAX_TAGS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Type,
    Class,
    Category,
    Subcategory,
    Tag,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Type => "type",
            NodeKind::Class => "class",
            NodeKind::Category => "category",
            NodeKind::Subcategory => "subcategory",
            NodeKind::Tag => "tag",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "type" => NodeKind::Type,
            "class" => NodeKind::Class,
            "category" => NodeKind::Category,
            "subcategory" => NodeKind::Subcategory,
            "tag" => NodeKind::Tag,
            _ => return None,
        })
    }
}

/// One entry of a declarative scheme: a node with a pointer to its parent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub kind: NodeKind,
    pub name: String,
    pub parent: Option<String>,
    pub display_name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub example: String,
}

/// Full declarative description of a scheme.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub nodes: Vec<NodeSpec>,
    /// Alternate spellings resolved by [`Taxonomy::resolve`], `(alias, tag id)`.
    pub aliases: Vec<(String, String)>,
    /// Pairs of priority groups whose tags may not co-occur.
    pub exclusive: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemeError {
    #[error("{}: duplicate tag id `{id}`", PathDisplay(path))]
    DuplicateTag { id: String, path: Vec<String> },
    #[error("{}: duplicate node `{name}`", PathDisplay(path))]
    DuplicateNode { name: String, path: Vec<String> },
    #[error("{}: parent `{parent}` is not a previously declared interior node", PathDisplay(path))]
    UnknownParent { parent: String, path: Vec<String> },
    #[error("{}: {reason}", PathDisplay(path))]
    BadNode { reason: String, path: Vec<String> },
    #[error("alias `{alias}` targets unknown tag `{target}`")]
    BadAlias { alias: String, target: String },
    #[error("exclusivity rule names unknown group `{0}`")]
    UnknownGroup(String),
}

struct PathDisplay<'a>(&'a [String]);

impl fmt::Display for PathDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("<root>");
        }
        f.write_str(&self.0.join("/"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaxonomyError {
    #[error("unknown tag `{0}`")]
    UnknownTag(String),
    #[error("unknown priority group `{0}`")]
    UnknownGroup(String),
    #[error("priority group `{0}` listed twice")]
    DuplicateGroup(String),
    #[error("no candidate tags given")]
    NoCandidates,
}

/// A broken label-set rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Violation {
    Empty,
    MaxTwo { count: usize },
    Exclusive { first: String, second: String, groups: (String, String) },
}

impl Violation {
    pub fn rule_name(&self) -> &'static str {
        match self {
            Violation::Empty => "empty",
            Violation::MaxTwo { .. } => "max_two",
            Violation::Exclusive { .. } => "exclusive",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "empty: at least one tag is required"),
            Violation::MaxTwo { count } => write!(f, "max_two: {count} tags given, at most two allowed"),
            Violation::Exclusive { first, second, groups } => write!(
                f,
                "exclusive: `{first}` ({}) cannot co-occur with `{second}` ({})",
                groups.0, groups.1
            ),
        }
    }
}

/// Outcome of [`Taxonomy::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Validation {
    pub violations: Vec<Violation>,
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LabelError {
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error("invalid label set: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join("; ")
}

/// A legal set of one or two tag ids, kept sorted by id.
///
/// Deserialization only checks the size bound; taxonomy rules are checked by
/// [`Taxonomy::label_set`] or [`Taxonomy::check`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSet(Vec<String>);

impl LabelSet {
    pub fn tags(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.0.iter().any(|t| t == tag)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    /// Tag ids joined by a single space.
    pub fn joined(&self) -> String {
        self.0.join(" ")
    }
}

impl TryFrom<Vec<String>> for LabelSet {
    type Error = String;

    fn try_from(mut v: Vec<String>) -> Result<Self, Self::Error> {
        v.sort();
        v.dedup();
        if v.is_empty() || v.len() > MAX_TAGS {
            return Err(format!("label set must hold 1 or 2 tags, got {}", v.len()));
        }
        Ok(LabelSet(v))
    }
}

impl From<LabelSet> for Vec<String> {
    fn from(l: LabelSet) -> Self {
        l.0
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.0.join(", "))
    }
}

/// A leaf of the scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tag {
    pub id: String,
    pub display_name: String,
    pub description: String,
    pub example: String,
    /// Names from the tree root down to and including the tag.
    pub path: Vec<String>,
    /// Priority group: nearest category ancestor, else nearest class, else the type.
    pub group: String,
}

impl Tag {
    pub fn root(&self) -> &str {
        &self.path[0]
    }
}

/// Ordered list of priority groups used by [`Taxonomy::prioritize`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorityOrder {
    groups: Vec<String>,
}

impl PriorityOrder {
    /// Builds an order from a preferred prefix; every group not named is
    /// appended in tree order.
    pub fn new<S: AsRef<str>>(taxonomy: &Taxonomy, preferred: &[S]) -> Result<Self, TaxonomyError> {
        let mut seen = BTreeSet::new();
        let mut groups = Vec::new();
        for g in preferred {
            let g = g.as_ref();
            if !taxonomy.groups.iter().any(|x| x == g) {
                return Err(TaxonomyError::UnknownGroup(g.to_owned()));
            }
            if !seen.insert(g.to_owned()) {
                return Err(TaxonomyError::DuplicateGroup(g.to_owned()));
            }
            groups.push(g.to_owned());
        }
        for g in &taxonomy.groups {
            if seen.insert(g.clone()) {
                groups.push(g.clone());
            }
        }
        Ok(PriorityOrder { groups })
    }

    /// answer, command, opinion, statement_non_opinion, question, then the rest.
    pub fn standard(taxonomy: &Taxonomy) -> Self {
        let preferred: Vec<&str> = DEFAULT_PRIORITY
            .iter()
            .copied()
            .filter(|g| taxonomy.groups.iter().any(|x| x == g))
            .collect();
        Self::new(taxonomy, &preferred).expect("filtered to known groups")
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    fn rank(&self, group: &str) -> usize {
        self.groups.iter().position(|g| g == group).unwrap_or(self.groups.len())
    }
}

const DEFAULT_PRIORITY: [&str; 5] = ["answer", "command", "opinion", "statement_non_opinion", "question"];

/// The loaded scheme. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    spec: SchemeSpec,
    tags: Vec<Tag>,
    index: BTreeMap<String, usize>,
    aliases: BTreeMap<String, String>,
    exclusive: Vec<(String, String)>,
    groups: Vec<String>,
}

impl PartialEq for Taxonomy {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Taxonomy {
    /// The built-in 23-tag scheme.
    pub fn builtin() -> Self {
        Self::from_spec(builtin_spec()).expect("built-in scheme is well formed")
    }

    pub fn from_spec(spec: SchemeSpec) -> Result<Self, SchemeError> {
        struct Interior {
            kind: NodeKind,
            path: Vec<String>,
            has_tag: bool,
        }
        let mut interior: BTreeMap<String, Interior> = BTreeMap::new();
        let mut interior_order: Vec<String> = Vec::new();
        let mut tags: Vec<Tag> = Vec::new();
        let mut index = BTreeMap::new();

        for node in &spec.nodes {
            let parent_path = match &node.parent {
                None => Vec::new(),
                Some(p) => match interior.get(p) {
                    Some(i) => i.path.clone(),
                    None => {
                        return Err(SchemeError::UnknownParent {
                            parent: p.clone(),
                            path: vec_with(&[], &node.name),
                        })
                    }
                },
            };
            let path = vec_with(&parent_path, &node.name);
            if node.name.is_empty() || node.name.chars().any(char::is_whitespace) {
                return Err(SchemeError::BadNode {
                    reason: "names must be non-empty without whitespace".into(),
                    path,
                });
            }
            let parent_kind = node.parent.as_ref().map(|p| interior[p].kind);
            match (node.kind, parent_kind) {
                (NodeKind::Type, None) => {}
                (NodeKind::Type, Some(_)) => {
                    return Err(SchemeError::BadNode { reason: "a type node must be a root".into(), path })
                }
                (_, None) => {
                    return Err(SchemeError::BadNode { reason: "only type nodes may be roots".into(), path })
                }
                (kind, Some(pk)) if kind != NodeKind::Tag && kind <= pk => {
                    return Err(SchemeError::BadNode {
                        reason: format!("a {} cannot sit under a {}", kind.as_str(), pk.as_str()),
                        path,
                    })
                }
                _ => {}
            }

            if node.kind == NodeKind::Tag {
                if index.contains_key(&node.name) {
                    return Err(SchemeError::DuplicateTag { id: node.name.clone(), path });
                }
                let mut group = None;
                for kind in [NodeKind::Category, NodeKind::Class, NodeKind::Type] {
                    group = parent_path.iter().rev().find(|n| interior[*n].kind == kind).cloned();
                    if group.is_some() {
                        break;
                    }
                }
                for anc in &parent_path {
                    interior.get_mut(anc).expect("ancestor exists").has_tag = true;
                }
                index.insert(node.name.clone(), tags.len());
                tags.push(Tag {
                    id: node.name.clone(),
                    display_name: node.display_name.clone(),
                    description: node.description.clone(),
                    example: node.example.clone(),
                    path,
                    group: group.expect("tag has a type ancestor"),
                });
            } else {
                if interior.contains_key(&node.name) {
                    return Err(SchemeError::DuplicateNode { name: node.name.clone(), path });
                }
                interior_order.push(node.name.clone());
                interior.insert(node.name.clone(), Interior { kind: node.kind, path, has_tag: false });
            }
        }

        for name in &interior_order {
            let i = &interior[name];
            if !i.has_tag {
                return Err(SchemeError::BadNode { reason: "interior node has no tag below it".into(), path: i.path.clone() });
            }
        }

        let mut groups: Vec<String> = Vec::new();
        for t in &tags {
            if !groups.contains(&t.group) {
                groups.push(t.group.clone());
            }
        }

        let mut aliases = BTreeMap::new();
        for (alias, target) in &spec.aliases {
            if !index.contains_key(target) {
                return Err(SchemeError::BadAlias { alias: alias.clone(), target: target.clone() });
            }
            aliases.insert(canonical_key(alias), target.clone());
        }
        for (a, b) in &spec.exclusive {
            for g in [a, b] {
                if !groups.contains(g) {
                    return Err(SchemeError::UnknownGroup(g.clone()));
                }
            }
        }
        let exclusive = spec.exclusive.clone();

        Ok(Taxonomy { spec, tags, index, aliases, exclusive, groups })
    }

    pub fn spec(&self) -> &SchemeSpec {
        &self.spec
    }

    pub fn tag_count(&self) -> usize {
        self.tags.len()
    }

    /// Tags in vocabulary (declaration) order.
    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn tag_ids(&self) -> Vec<String> {
        self.tags.iter().map(|t| t.id.clone()).collect()
    }

    pub fn tag(&self, id: &str) -> Option<&Tag> {
        self.index.get(id).map(|&i| &self.tags[i])
    }

    pub fn tag_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Priority groups in tree order.
    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn exclusive_rules(&self) -> &[(String, String)] {
        &self.exclusive
    }

    /// Resolves a display spelling or alias ("yes/no question", "pos answer")
    /// to a canonical tag id.
    pub fn resolve(&self, name: &str) -> Option<&str> {
        let key = canonical_key(name);
        if let Some(&i) = self.index.get(&key) {
            return Some(&self.tags[i].id);
        }
        self.aliases.get(&key).map(String::as_str)
    }

    fn lookup(&self, id: &str) -> Result<&Tag, TaxonomyError> {
        self.tag(id).ok_or_else(|| TaxonomyError::UnknownTag(id.to_owned()))
    }

    /// Whether two distinct tags may share a segment.
    pub fn compatible(&self, a: &str, b: &str) -> Result<bool, TaxonomyError> {
        Ok(self.exclusive_between(self.lookup(a)?, self.lookup(b)?).is_none())
    }

    fn exclusive_between(&self, a: &Tag, b: &Tag) -> Option<(String, String)> {
        self.exclusive
            .iter()
            .find(|(x, y)| (a.group == *x && b.group == *y) || (a.group == *y && b.group == *x))
            .cloned()
    }

    /// Checks a proposed set of tag ids. Duplicate ids count once.
    pub fn validate<S: AsRef<str>>(&self, ids: &[S]) -> Result<Validation, TaxonomyError> {
        let mut tags: Vec<&Tag> = Vec::new();
        for id in ids {
            let t = self.lookup(id.as_ref())?;
            if !tags.iter().any(|x| x.id == t.id) {
                tags.push(t);
            }
        }
        let mut violations = Vec::new();
        if tags.is_empty() {
            violations.push(Violation::Empty);
        }
        if tags.len() > MAX_TAGS {
            violations.push(Violation::MaxTwo { count: tags.len() });
        }
        for (i, a) in tags.iter().enumerate() {
            for b in &tags[i + 1..] {
                if let Some(groups) = self.exclusive_between(a, b) {
                    violations.push(Violation::Exclusive { first: a.id.clone(), second: b.id.clone(), groups });
                }
            }
        }
        Ok(Validation { violations })
    }

    /// Builds a [`LabelSet`], failing on unknown ids or broken rules.
    pub fn label_set<S: AsRef<str>>(&self, ids: &[S]) -> Result<LabelSet, LabelError> {
        let v = self.validate(ids)?;
        if !v.is_ok() {
            return Err(LabelError::Invalid(v.violations));
        }
        let ids: Vec<String> = ids.iter().map(|s| s.as_ref().to_owned()).collect();
        Ok(LabelSet::try_from(ids).expect("validated size"))
    }

    /// Re-checks a label set obtained elsewhere (deserialized, user supplied).
    pub fn check(&self, labels: &LabelSet) -> Result<(), LabelError> {
        self.label_set(labels.tags()).map(|_| ())
    }

    /// Picks at most two tags from `candidates` by ascending group rank,
    /// skipping any tag that would make the set illegal. Ties within a group
    /// go to the tag declared first.
    pub fn prioritize<S: AsRef<str>>(&self, candidates: &[S], order: &PriorityOrder) -> Result<LabelSet, TaxonomyError> {
        let mut ranked: Vec<(usize, usize)> = Vec::new();
        for c in candidates {
            let idx = self.tag_index(c.as_ref()).ok_or_else(|| TaxonomyError::UnknownTag(c.as_ref().to_owned()))?;
            let key = (order.rank(&self.tags[idx].group), idx);
            if !ranked.contains(&key) {
                ranked.push(key);
            }
        }
        if ranked.is_empty() {
            return Err(TaxonomyError::NoCandidates);
        }
        ranked.sort_unstable();
        let mut chosen: Vec<&Tag> = Vec::new();
        for (_, idx) in ranked {
            if chosen.len() == MAX_TAGS {
                break;
            }
            let t = &self.tags[idx];
            if chosen.iter().all(|c| self.exclusive_between(c, t).is_none()) {
                chosen.push(t);
            }
        }
        let ids: Vec<String> = chosen.iter().map(|t| t.id.clone()).collect();
        Ok(LabelSet::try_from(ids).expect("one or two tags"))
    }
}

fn vec_with(prefix: &[String], last: &str) -> Vec<String> {
    let mut v = prefix.to_vec();
    v.push(last.to_owned());
    v
}

/// Lowercases and folds spaces, hyphens and slashes to underscores.
fn canonical_key(name: &str) -> String {
    let mut out = String::new();
    for word in name
        .trim()
        .split(|c: char| c.is_whitespace() || c == '-' || c == '/' || c == '_')
        .filter(|w| !w.is_empty())
    {
        if !out.is_empty() {
            out.push('_');
        }
        out.push_str(&word.to_lowercase());
    }
    out
}

// (kind, name, parent, display name, description, example)
type Row = (NodeKind, &'static str, Option<&'static str>, &'static str, &'static str, &'static str);

const BUILTIN: &[Row] = {
    use NodeKind::*;
    &[
        (Type, "semantic_request", None, "semantic request", "", ""),
        (Class, "initiative", Some("semantic_request"), "initiative", "", ""),
        (Category, "question", Some("initiative"), "question", "", ""),
        (Subcategory, "open_ended_question", Some("question"), "open-ended question", "", ""),
        (Tag, "factual_question", Some("open_ended_question"), "factual question", "factual questions", "How old is Tom Cruise; How's the weather today"),
        (Tag, "opinion_question", Some("open_ended_question"), "opinion question", "opinionated questions", "What's your favorite book; what do you think of disney movies"),
        (Tag, "yes_no_question", Some("question"), "yes/no question", "yes or no questions", "Do you like pizza; did you watch the game last night"),
        (Category, "command", Some("initiative"), "command", "", ""),
        (Tag, "task_command", Some("command"), "task command", "commands/requests (can be in a question format) for some actions that may be different from the ongoing conversation", "can i ask you a question; let's talk about the immigration policy; repeat"),
        (Tag, "invalid_command", Some("command"), "invalid command", "general device/system commands that cannot be handled by the social bot", "show me a picture; cook food for me"),
        (Class, "responsive", Some("semantic_request"), "responsive", "", ""),
        (Category, "opinion", Some("responsive"), "opinion", "", ""),
        (Subcategory, "additional_opinion", Some("opinion"), "additional opinion", "", ""),
        (Tag, "appreciation", Some("additional_opinion"), "appreciation", "appreciation towards the previous utterance", "that's cool; that's really awesome"),
        (Tag, "general_opinion", Some("additional_opinion"), "general opinion", "personal view with polarized sentiment", "dogs are adorable; (A: How do you like Tom) B: i think he is great"),
        (Tag, "complaint", Some("additional_opinion"), "complaint", "complaint about the response from another party", "I can't hear you; what are you talking about; you didn't answer my question"),
        (Tag, "comment", Some("opinion"), "comment", "comments on the response from another conversation party", "(A: my friend thinks we live in the matrix) B1: she is probably right; B2: you are joking, right; B3: i agree"),
        (Category, "statement_non_opinion", Some("responsive"), "statement non-opinion", "", ""),
        (Tag, "statement_non_opinion", Some("statement_non_opinion"), "statement non-opinion", "factual information", "I have a dog named Max; I am 10 years old; (A: what movie have you seen recently) B: the avengers"),
        (Category, "answer", Some("responsive"), "answer", "", ""),
        (Tag, "other_answer", Some("answer"), "other answer", "answers that are neither positive or negative", "I don't know; i don't have a favorite; (A: do you like listening to music) B: occasionally"),
        (Tag, "positive_answer", Some("answer"), "positive answer", "positive answers", "yes; sure; i think so; why not"),
        (Tag, "negative_answer", Some("answer"), "negative answer", "negative response to a previous question", "no; not really; nothing right now"),
        (Type, "functional_request", None, "functional request", "", ""),
        (Class, "incomplete", Some("functional_request"), "incomplete", "", ""),
        (Tag, "abandon", Some("incomplete"), "abandon", "not a complete sentence", "So uh; I think; can we"),
        (Tag, "nonsense", Some("incomplete"), "nonsense", "utterances that do not make sense to humans", "he all out"),
        (Class, "social_convention", Some("functional_request"), "social convention", "", ""),
        (Tag, "hold", Some("social_convention"), "hold", "a pause before saying something", "let me see; well"),
        (Tag, "opening", Some("social_convention"), "opening", "opening of a conversation", "hello my name is tom; hi"),
        (Tag, "closing", Some("social_convention"), "closing", "closing of a conversation", "nice talking to you; goodbye"),
        (Tag, "thanks", Some("social_convention"), "thanks", "expression of thankfulness", "thank you"),
        (Tag, "back_channeling", Some("social_convention"), "back-channeling", "acknowledgement to the previous utterance", "Uh-huh; (A: i learned that ...) B: okay/yeah/right/really?"),
        (Tag, "apology", Some("social_convention"), "apology", "apology", "I'm sorry"),
        (Tag, "apology_response", Some("social_convention"), "apology response", "response to apologies", "That's all right"),
        (Class, "other", Some("functional_request"), "other", "", ""),
        (Tag, "other", Some("other"), "other", "utterances that cannot be assigned to other tags", ""),
    ]
};

const BUILTIN_ALIASES: &[(&str, &str)] = &[
    ("other_opinion", "comment"),
    ("pos_answer", "positive_answer"),
    ("neg_answer", "negative_answer"),
    ("other_answers", "other_answer"),
    ("thanking", "thanks"),
];

/// The declarative form of the built-in scheme.
pub fn builtin_spec() -> SchemeSpec {
    SchemeSpec {
        nodes: BUILTIN
            .iter()
            .map(|&(kind, name, parent, display, description, example)| NodeSpec {
                kind,
                name: name.into(),
                parent: parent.map(Into::into),
                display_name: display.into(),
                description: description.into(),
                example: example.into(),
            })
            .collect(),
        aliases: BUILTIN_ALIASES.iter().map(|&(a, t)| (a.into(), t.into())).collect(),
        exclusive: vec![
            ("opinion".into(), "statement_non_opinion".into()),
            ("question".into(), "answer".into()),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tax() -> Taxonomy {
        Taxonomy::builtin()
    }

    #[test]
    fn builtin_has_23_tags_in_vocabulary_order() {
        let t = tax();
        assert_eq!(t.tag_count(), 23);
        let ids = t.tag_ids();
        assert_eq!(&ids[..3], &["factual_question", "opinion_question", "yes_no_question"]);
        assert_eq!(ids.last().unwrap(), "other");
        let semantic = t.tags().iter().filter(|x| x.root() == "semantic_request").count();
        assert_eq!(semantic, 13);
        assert_eq!(t.tag_count() - semantic, 10);
    }

    #[test]
    fn paths_follow_the_tree() {
        let t = tax();
        assert_eq!(t.tag("positive_answer").unwrap().path, ["semantic_request", "responsive", "answer", "positive_answer"]);
        assert_eq!(
            t.tag("general_opinion").unwrap().path,
            ["semantic_request", "responsive", "opinion", "additional_opinion", "general_opinion"]
        );
        assert_eq!(t.tag("hold").unwrap().group, "social_convention");
        assert_eq!(t.tag("factual_question").unwrap().group, "question");
    }

    #[test]
    fn validate_examples() {
        let t = tax();
        assert!(t.validate(&["general_opinion", "negative_answer"]).unwrap().is_ok());
        assert!(t.validate(&["positive_answer"]).unwrap().is_ok());
        let v = t.validate(&["general_opinion", "statement_non_opinion"]).unwrap();
        assert_eq!(v.violations.len(), 1);
        assert_eq!(v.violations[0].rule_name(), "exclusive");
        let v = t.validate(&["positive_answer", "task_command", "comment"]).unwrap();
        assert_eq!(v.violations, [Violation::MaxTwo { count: 3 }]);
        assert_eq!(t.validate::<&str>(&[]).unwrap().violations, [Violation::Empty]);
        assert_eq!(t.validate(&["nope"]), Err(TaxonomyError::UnknownTag("nope".into())));
    }

    #[test]
    fn duplicate_ids_collapse() {
        let t = tax();
        assert!(t.validate(&["closing", "closing"]).unwrap().is_ok());
        assert_eq!(t.label_set(&["closing", "closing"]).unwrap().len(), 1);
    }

    #[test]
    fn prioritize_examples() {
        let t = tax();
        let cands = ["task_command", "opinion_question", "general_opinion"];
        let std = PriorityOrder::standard(&t);
        assert_eq!(t.prioritize(&cands, &std).unwrap().tags(), ["general_opinion", "task_command"]);
        let topic = PriorityOrder::new(&t, &["answer", "command", "question", "opinion"]).unwrap();
        assert_eq!(t.prioritize(&cands, &topic).unwrap().tags(), ["opinion_question", "task_command"]);
        assert_eq!(t.prioritize(&["closing"], &std).unwrap().tags(), ["closing"]);
    }

    #[test]
    fn prioritize_skips_illegal_additions() {
        let t = tax();
        let std = PriorityOrder::standard(&t);
        // answer outranks question, and the two cannot co-occur
        let out = t.prioritize(&["yes_no_question", "positive_answer"], &std).unwrap();
        assert_eq!(out.tags(), ["positive_answer"]);
        let out = t.prioritize(&["yes_no_question", "positive_answer", "hold"], &std).unwrap();
        assert_eq!(out.tags(), ["hold", "positive_answer"]);
    }

    #[test]
    fn standard_order_is_complete() {
        let t = tax();
        let o = PriorityOrder::standard(&t);
        assert_eq!(
            o.groups(),
            ["answer", "command", "opinion", "statement_non_opinion", "question", "incomplete", "social_convention", "other"]
        );
        assert_eq!(PriorityOrder::new(&t, &["answer", "answer"]), Err(TaxonomyError::DuplicateGroup("answer".into())));
        assert!(PriorityOrder::new(&t, &["bogus"]).is_err());
    }

    #[test]
    fn resolve_spellings() {
        let t = tax();
        assert_eq!(t.resolve("yes/no question"), Some("yes_no_question"));
        assert_eq!(t.resolve("yes-no question"), Some("yes_no_question"));
        assert_eq!(t.resolve("back-channeling"), Some("back_channeling"));
        assert_eq!(t.resolve("statement non_opinion"), Some("statement_non_opinion"));
        assert_eq!(t.resolve("other opinion"), Some("comment"));
        assert_eq!(t.resolve("pos answer"), Some("positive_answer"));
        assert_eq!(t.resolve("Thanking"), Some("thanks"));
        assert_eq!(t.resolve("something else"), None);
    }

    #[test]
    fn duplicate_tag_in_spec_is_rejected_with_path() {
        let mut spec = builtin_spec();
        let mut dup = spec.nodes.iter().find(|n| n.name == "closing").unwrap().clone();
        dup.parent = Some("incomplete".into());
        spec.nodes.push(dup);
        match Taxonomy::from_spec(spec) {
            Err(SchemeError::DuplicateTag { id, path }) => {
                assert_eq!(id, "closing");
                assert_eq!(path, ["functional_request", "incomplete", "closing"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn structural_errors() {
        let mut spec = builtin_spec();
        spec.nodes.push(NodeSpec {
            kind: NodeKind::Tag,
            name: "orphan".into(),
            parent: Some("nowhere".into()),
            display_name: "orphan".into(),
            description: String::new(),
            example: String::new(),
        });
        assert!(matches!(Taxonomy::from_spec(spec), Err(SchemeError::UnknownParent { .. })));

        let mut spec = builtin_spec();
        spec.nodes.push(NodeSpec {
            kind: NodeKind::Class,
            name: "empty_class".into(),
            parent: Some("functional_request".into()),
            display_name: "empty".into(),
            description: String::new(),
            example: String::new(),
        });
        assert!(matches!(Taxonomy::from_spec(spec), Err(SchemeError::BadNode { .. })));

        let mut spec = builtin_spec();
        spec.exclusive.push(("opinion".into(), "nothing".into()));
        assert_eq!(Taxonomy::from_spec(spec).unwrap_err(), SchemeError::UnknownGroup("nothing".into()));
    }

    #[test]
    fn label_set_serde_shape_checks_size() {
        assert!(LabelSet::try_from(Vec::<String>::new()).is_err());
        assert!(LabelSet::try_from(vec!["a".into(), "b".into(), "c".into()]).is_err());
        let l = LabelSet::try_from(vec!["statement_non_opinion".into(), "negative_answer".into()]).unwrap();
        assert_eq!(l.joined(), "negative_answer statement_non_opinion");
    }
}
