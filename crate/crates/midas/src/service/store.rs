//! Annotation state: task locks, the append-only log, suggestions and
//! agreement.
//!
//! Every mutation goes through one mutex, and a submission is written to the
//! log before it becomes visible, so the log is always a superset of what
//! readers have seen.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use midas_core::classifier::{input_key, ModelBundle};
use midas_core::context::{build_context, context_window, ContextMode};
use midas_core::corpus::{attach_annotations, AnnotatedCorpus, AnnotationRecord, Conversation, Speaker};
use midas_core::metrics::{cohen_kappa, KappaMode, MetricsError};
use midas_core::taxonomy::{TaxonomyError, Violation};
use midas_core::{LabelSet, Taxonomy};
use parking_lot::Mutex;
use serde::Serialize;

use crate::formats::corpus::{render_annotated, render_log_record};

pub const DEFAULT_LOCK_TTL_MS: u64 = 10 * 60 * 1000;

pub trait Clock: Send + Sync {
    /// Milliseconds since the Unix epoch.
    fn now_ms(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
    }
}

/// A clock that only moves when told to.
#[derive(Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        ManualClock(AtomicU64::new(start_ms))
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("annotator id must be non-empty")]
    EmptyAnnotator,
    #[error("annotator `{0}` is not registered")]
    UnknownAnnotator(String),
    #[error("segment `{0}` is not an annotatable segment")]
    UnknownSegment(String),
    #[error(transparent)]
    UnknownTag(#[from] TaxonomyError),
    #[error("label set rejected: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Rejected(Vec<Violation>),
    #[error("segment `{segment}` is locked by `{owner}` until {expires_at}")]
    LockedByOther { segment: String, owner: String, expires_at: u64 },
    #[error("context unavailable: {0}")]
    Context(String),
    #[error("annotation log: {0}")]
    Log(String),
    #[error("record for segment `{segment}` by `{annotator}` at log line {line}: {msg}")]
    Replay { segment: String, annotator: String, line: usize, msg: String },
}

impl StoreError {
    /// Short machine-readable name.
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::EmptyAnnotator => "bad_request",
            StoreError::UnknownAnnotator(_) => "unknown_annotator",
            StoreError::UnknownSegment(_) => "unknown_segment",
            StoreError::UnknownTag(_) => "unknown_tag",
            StoreError::Rejected(_) => "constraint_violation",
            StoreError::LockedByOther { .. } => "stale_lock",
            StoreError::Context(_) => "context_unavailable",
            StoreError::Log(_) | StoreError::Replay { .. } => "storage",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LockInfo {
    pub owner: String,
    pub expires_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Suggestion {
    pub labels: LabelSet,
    pub scores: BTreeMap<String, f64>,
    pub model_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryUnit {
    pub segment_id: String,
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotationTask {
    pub segment_id: String,
    pub conversation_id: String,
    pub text: String,
    /// Last unit of the nearest preceding machine turn.
    pub sys_unit: Option<String>,
    /// Previous unit of the same turn.
    pub user_prev: Option<String>,
    /// Every unit of the conversation before this one.
    pub history: Vec<HistoryUnit>,
    /// Current label set of each annotator who has labeled this segment.
    pub labels: BTreeMap<String, LabelSet>,
    pub suggestion: Option<Suggestion>,
    pub lock: LockInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Submission {
    pub record: AnnotationRecord,
    /// Same content as the annotator's current record; nothing was appended.
    pub duplicate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairAgreement {
    pub a: String,
    pub b: String,
    pub overlap: usize,
    pub kappa: Option<f64>,
    /// Why `kappa` is missing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub mode: KappaMode,
    /// Segments labeled per annotator.
    pub coverage: BTreeMap<String, usize>,
    pub pairs: Vec<PairAgreement>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Health {
    pub segments: usize,
    pub annotators: usize,
    pub records: usize,
    pub model: Option<String>,
}

#[derive(Debug, Clone)]
pub struct StoreConfig {
    pub lock_ttl_ms: u64,
    pub kappa_mode: KappaMode,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig { lock_ttl_ms: DEFAULT_LOCK_TTL_MS, kappa_mode: KappaMode::ExactSet }
    }
}

struct Model {
    bundle: ModelBundle,
    version: String,
}

#[derive(Debug, Clone)]
struct Lock {
    owner: String,
    expires_at: u64,
}

struct State {
    annotators: BTreeSet<String>,
    locks: HashMap<String, Lock>,
    latest: BTreeMap<String, BTreeMap<String, AnnotationRecord>>,
    records: usize,
    log: Box<dyn Write + Send>,
}

pub struct AnnotationStore {
    taxonomy: Taxonomy,
    conversations: Vec<Conversation>,
    /// Human segments in conversation order, with their conversation index.
    queue: Vec<(usize, String)>,
    position: HashMap<String, usize>,
    model: Option<Model>,
    clock: Arc<dyn Clock>,
    config: StoreConfig,
    state: Mutex<State>,
    suggestions: Mutex<HashMap<String, Suggestion>>,
}

impl AnnotationStore {
    /// Replays `existing` log records, then appends new ones to `log`.
    pub fn new(
        taxonomy: Taxonomy,
        conversations: Vec<Conversation>,
        existing: Vec<AnnotationRecord>,
        log: Box<dyn Write + Send>,
        model: Option<ModelBundle>,
        clock: Arc<dyn Clock>,
        config: StoreConfig,
    ) -> Result<Self, StoreError> {
        let mut queue = Vec::new();
        for (ci, c) in conversations.iter().enumerate() {
            for u in c.units().filter(|u| u.speaker == Speaker::Human) {
                queue.push((ci, u.id.clone()));
            }
        }
        let position = queue.iter().enumerate().map(|(i, (_, id))| (id.clone(), i)).collect();
        let model = match model {
            Some(bundle) => {
                bundle.check(&taxonomy).map_err(|e| StoreError::Log(format!("model: {e}")))?;
                let version = input_key(&serde_json::to_string(&bundle).expect("serializable"))[..16].to_owned();
                Some(Model { bundle, version })
            }
            None => None,
        };
        let mut store = AnnotationStore {
            taxonomy,
            conversations,
            queue,
            position,
            model,
            clock,
            config,
            state: Mutex::new(State {
                annotators: BTreeSet::new(),
                locks: HashMap::new(),
                latest: BTreeMap::new(),
                records: 0,
                log,
            }),
            suggestions: Mutex::new(HashMap::new()),
        };
        let state = store.state.get_mut();
        for (i, r) in existing.into_iter().enumerate() {
            let fail = |msg: String| StoreError::Replay {
                segment: r.segment_id.clone(),
                annotator: r.annotator_id.clone(),
                line: i + 1,
                msg,
            };
            if !store.position.contains_key(&r.segment_id) {
                return Err(fail("unknown segment".into()));
            }
            store.taxonomy.check(&r.labels).map_err(|e| fail(e.to_string()))?;
            state.annotators.insert(r.annotator_id.clone());
            state.records += 1;
            state.latest.entry(r.segment_id.clone()).or_default().insert(r.annotator_id.clone(), r);
        }
        Ok(store)
    }

    /// Opens (creating if needed) an append-only log file and replays it.
    pub fn open(
        taxonomy: Taxonomy,
        conversations: Vec<Conversation>,
        log_path: &Path,
        model: Option<ModelBundle>,
        clock: Arc<dyn Clock>,
        config: StoreConfig,
    ) -> Result<Self, StoreError> {
        let existing =
            crate::formats::corpus::read_log(log_path, &taxonomy).map_err(|e| StoreError::Log(e.to_string()))?;
        let file: File = OpenOptions::new()
            .create(true)
            .append(true)
            .open(log_path)
            .map_err(|e| StoreError::Log(format!("{}: {e}", log_path.display())))?;
        Self::new(taxonomy, conversations, existing, Box::new(file), model, clock, config)
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn segment_ids(&self) -> impl Iterator<Item = &str> {
        self.queue.iter().map(|(_, id)| id.as_str())
    }

    /// Returns `true` when the annotator is new.
    pub fn register(&self, annotator_id: &str) -> Result<bool, StoreError> {
        let id = annotator_id.trim();
        if id.is_empty() {
            return Err(StoreError::EmptyAnnotator);
        }
        Ok(self.state.lock().annotators.insert(id.to_owned()))
    }

    fn require_annotator(state: &State, annotator_id: &str) -> Result<(), StoreError> {
        if state.annotators.contains(annotator_id) {
            Ok(())
        } else {
            Err(StoreError::UnknownAnnotator(annotator_id.to_owned()))
        }
    }

    /// The first segment in corpus order that the annotator has not labeled
    /// and nobody else holds a live lock on. Locks it for the annotator and
    /// releases any other lock the annotator held.
    pub fn next_task(&self, annotator_id: &str) -> Result<Option<AnnotationTask>, StoreError> {
        let (pos, lock, labels) = {
            let mut state = self.state.lock();
            Self::require_annotator(&state, annotator_id)?;
            let now = self.clock.now_ms();
            state.locks.retain(|_, l| l.owner != annotator_id && l.expires_at > now);
            let found = self.queue.iter().position(|(_, seg)| {
                let done = state.latest.get(seg).is_some_and(|m| m.contains_key(annotator_id));
                !done && !state.locks.contains_key(seg)
            });
            let Some(pos) = found else { return Ok(None) };
            let seg = &self.queue[pos].1;
            let lock = Lock { owner: annotator_id.to_owned(), expires_at: now + self.config.lock_ttl_ms };
            state.locks.insert(seg.clone(), lock.clone());
            let labels: BTreeMap<String, LabelSet> = state
                .latest
                .get(seg)
                .map(|m| m.iter().map(|(a, r)| (a.clone(), r.labels.clone())).collect())
                .unwrap_or_default();
            (pos, lock, labels)
        };
        let (ci, seg) = &self.queue[pos];
        let conv = &self.conversations[*ci];
        let at = conv.find(seg).expect("queued segment exists");
        let window = context_window(conv, seg, ContextMode::Text, None).expect("human segment");
        let empty = midas_core::context::EMPTY_TOKEN;
        let history = conv
            .units()
            .take_while(|u| u.id != *seg)
            .map(|u| HistoryUnit { segment_id: u.id.clone(), speaker: u.speaker, text: u.text.clone() })
            .collect();
        // A context that cannot be rendered yet (labels missing in a
        // dialog-act mode) only means no suggestion.
        let suggestion = self.suggest(seg).ok().flatten();
        Ok(Some(AnnotationTask {
            segment_id: seg.clone(),
            conversation_id: conv.id.clone(),
            text: conv.unit(at).text.clone(),
            sys_unit: (window.sys_unit != empty).then_some(window.sys_unit),
            user_prev: (window.user_prev != empty).then_some(window.user_prev),
            history,
            labels,
            suggestion,
            lock: LockInfo { owner: lock.owner, expires_at: lock.expires_at },
        }))
    }

    /// Validates and appends a record. Invalid sets and submissions against
    /// another annotator's live lock change nothing. Resubmitting the
    /// annotator's current content is accepted without a new log line.
    pub fn submit(
        &self,
        annotator_id: &str,
        segment_id: &str,
        labels: &[String],
        completed_text: Option<&str>,
    ) -> Result<Submission, StoreError> {
        if !self.position.contains_key(segment_id) {
            return Err(StoreError::UnknownSegment(segment_id.to_owned()));
        }
        let verdict = self.taxonomy.validate(labels)?;
        let completed_text = completed_text.map(str::trim).filter(|t| !t.is_empty()).map(str::to_owned);

        let mut state = self.state.lock();
        Self::require_annotator(&state, annotator_id)?;
        let now = self.clock.now_ms();
        if let Some(l) = state.locks.get(segment_id) {
            if l.owner != annotator_id && l.expires_at > now {
                return Err(StoreError::LockedByOther {
                    segment: segment_id.to_owned(),
                    owner: l.owner.clone(),
                    expires_at: l.expires_at,
                });
            }
        }
        if !verdict.is_ok() {
            return Err(StoreError::Rejected(verdict.violations));
        }
        let labels = self.taxonomy.label_set(labels).expect("validated");
        let current = state.latest.get(segment_id).and_then(|m| m.get(annotator_id));
        if let Some(r) = current.filter(|r| r.labels == labels && r.completed_text == completed_text) {
            let record = r.clone();
            state.locks.remove(segment_id);
            return Ok(Submission { record, duplicate: true });
        }
        let record = AnnotationRecord {
            segment_id: segment_id.to_owned(),
            annotator_id: annotator_id.to_owned(),
            labels,
            completed_text,
            created_at: now,
        };
        let line = render_log_record(&record);
        state.log.write_all(line.as_bytes()).and_then(|_| state.log.flush()).map_err(|e| StoreError::Log(e.to_string()))?;
        state.records += 1;
        state.latest.entry(segment_id.to_owned()).or_default().insert(annotator_id.to_owned(), record.clone());
        state.locks.remove(segment_id);
        Ok(Submission { record, duplicate: false })
    }

    /// Current live lock on a segment.
    pub fn lock_of(&self, segment_id: &str) -> Option<LockInfo> {
        let now = self.clock.now_ms();
        let state = self.state.lock();
        state
            .locks
            .get(segment_id)
            .filter(|l| l.expires_at > now)
            .map(|l| LockInfo { owner: l.owner.clone(), expires_at: l.expires_at })
    }

    /// Latest label set per segment across annotators (most recent record
    /// wins), used as dialog-act context for suggestions.
    fn consensus(&self, conv: &Conversation) -> BTreeMap<String, LabelSet> {
        let state = self.state.lock();
        conv.units()
            .filter_map(|u| {
                let m = state.latest.get(&u.id)?;
                let r = m.values().max_by_key(|r| r.created_at)?;
                Some((u.id.clone(), r.labels.clone()))
            })
            .collect()
    }

    /// `Ok(None)` when no model is configured.
    pub fn suggest(&self, segment_id: &str) -> Result<Option<Suggestion>, StoreError> {
        let pos = *self.position.get(segment_id).ok_or_else(|| StoreError::UnknownSegment(segment_id.to_owned()))?;
        let Some(model) = &self.model else { return Ok(None) };
        let conv = &self.conversations[self.queue[pos].0];
        let mode = model.bundle.context_mode;
        let input = if mode == ContextMode::Text {
            build_context(conv, segment_id, mode, None)
        } else {
            let labels = self.consensus(conv);
            build_context(conv, segment_id, mode, Some(&labels))
        }
        .map_err(|e| StoreError::Context(e.to_string()))?;
        if let Some(s) = self.suggestions.lock().get(&input) {
            return Ok(Some(s.clone()));
        }
        let scores = model.bundle.predict_scores(&input);
        let labels = midas_core::classifier::decode(&scores, &model.bundle.decoding, &self.taxonomy);
        let s = Suggestion {
            labels,
            scores: model.bundle.tags.iter().cloned().zip(scores).collect(),
            model_version: model.version.clone(),
        };
        self.suggestions.lock().insert(input, s.clone());
        Ok(Some(s))
    }

    pub fn agreement(&self) -> AgreementReport {
        let snapshot = self.annotated();
        let annotators: Vec<String> = snapshot.annotators().into_iter().collect();
        let by: BTreeMap<&str, BTreeMap<String, LabelSet>> =
            annotators.iter().map(|a| (a.as_str(), snapshot.by_annotator(a))).collect();
        let coverage = by.iter().map(|(a, m)| (a.to_string(), m.len())).collect();
        let mut pairs = Vec::new();
        for (i, a) in annotators.iter().enumerate() {
            for b in &annotators[i + 1..] {
                let (ma, mb) = (&by[a.as_str()], &by[b.as_str()]);
                let shared: BTreeMap<String, LabelSet> =
                    ma.iter().filter(|(k, _)| mb.contains_key(*k)).map(|(k, v)| (k.clone(), v.clone())).collect();
                let other: BTreeMap<String, LabelSet> =
                    shared.keys().map(|k| (k.clone(), mb[k].clone())).collect();
                let (kappa, note) = match cohen_kappa(&shared, &other, self.config.kappa_mode) {
                    Ok(k) => (Some(k), None),
                    Err(MetricsError::TooFewSegments(0)) => (None, Some("empty_overlap".to_owned())),
                    Err(e) => (None, Some(e.to_string())),
                };
                pairs.push(PairAgreement { a: a.clone(), b: b.clone(), overlap: shared.len(), kappa, note });
            }
        }
        AgreementReport { mode: self.config.kappa_mode, coverage, pairs }
    }

    /// Latest record per (segment, annotator).
    pub fn annotated(&self) -> AnnotatedCorpus {
        let records: Vec<AnnotationRecord> = {
            let state = self.state.lock();
            state.latest.values().flat_map(|m| m.values().cloned()).collect()
        };
        attach_annotations(self.conversations.clone(), records, &self.taxonomy).expect("records validated on write")
    }

    /// The annotated corpus in corpus-file form.
    pub fn export(&self) -> String {
        render_annotated(&self.annotated())
    }

    pub fn health(&self) -> Health {
        let state = self.state.lock();
        Health {
            segments: self.queue.len(),
            annotators: state.annotators.len(),
            records: state.records,
            model: self.model.as_ref().map(|m| m.version.clone()),
        }
    }
}
