#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use midas::core::corpus::{Conversation, Speaker, Turn};
use midas::core::Taxonomy;
use midas::formats;
use midas::service::http::{router, AppState};
use midas::service::store::{AnnotationStore, StoreConfig, SystemClock};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

pub const QUESTION: [&str; 3] = ["factual_question", "opinion_question", "yes_no_question"];
pub const ANSWER: [&str; 3] = ["other_answer", "positive_answer", "negative_answer"];
pub const OPINION: [&str; 4] = ["appreciation", "general_opinion", "complaint", "comment"];

/// Whether a proposed set of known tags is a legal label set, written from
/// the rules directly rather than through the taxonomy.
pub fn legal(tags: &[&str]) -> bool {
    let set: BTreeSet<&str> = tags.iter().copied().collect();
    if set.is_empty() || set.len() > 2 {
        return false;
    }
    let has = |g: &[&str]| set.iter().any(|t| g.contains(t));
    let clash_qa = has(&QUESTION) && has(&ANSWER);
    let clash_os = has(&OPINION) && set.contains("statement_non_opinion");
    !(clash_qa || clash_os)
}

/// `n` conversations, each with three machine turns and three human turns
/// of one or two units. Unit ids are `c{i}:{turn}.{k}`.
pub fn synthetic_corpus(n: usize) -> Vec<Conversation> {
    (0..n)
        .map(|i| {
            let id = format!("c{i}");
            let mut turns = Vec::new();
            for t in 0..6 {
                let speaker = if t % 2 == 0 { Speaker::Machine } else { Speaker::Human };
                let units: Vec<String> = if speaker == Speaker::Human && t != 3 {
                    vec![format!("oh {i} {t}"), format!("tell me about item {i} {t}")]
                } else {
                    vec![format!("utterance {i} {t}")]
                };
                turns.push(Turn::from_units(&format!("{id}:{t}"), speaker, &units.join(" "), &units));
            }
            Conversation { id, turns }
        })
        .collect()
}

pub async fn call(app: &Router, method: &str, path: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(path).header("content-type", "application/json");
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}

pub fn open_state(convs: Vec<Conversation>, log: &Path) -> AppState {
    let store = AnnotationStore::open(
        Taxonomy::builtin(),
        convs,
        log,
        None,
        Arc::new(SystemClock),
        StoreConfig::default(),
    )
    .unwrap();
    AppState { store: Arc::new(store), export_path: None }
}

#[derive(Debug, Default, Clone)]
pub struct StormReport {
    pub submissions: usize,
    pub accepted: usize,
    pub duplicates: usize,
    pub rejected: usize,
    pub unknown_tag: usize,
    pub conflicts: usize,
    pub log_records: usize,
    pub invalid_persisted: usize,
    pub exclusivity_violations: Vec<String>,
    pub status_mismatches: Vec<String>,
    pub replay_matches: bool,
}

/// What each client currently holds, with a counter bumped on every change.
/// A client clears its entry before any request that could release the lock
/// and sets it only after the lock is granted, so an unchanged entry observed
/// before and after another client's request means the lock was live for the
/// whole of that request.
type Holders = Arc<Mutex<[(u64, Option<String>); 2]>>;

fn set_holder(h: &Holders, me: usize, seg: Option<String>) {
    let mut g = h.lock().unwrap();
    g[me].0 += 1;
    g[me].1 = seg;
}

fn holder(h: &Holders, who: usize) -> (u64, Option<String>) {
    h.lock().unwrap()[who].clone()
}

fn random_labels(rng: &mut ChaCha8Rng, tags: &[String]) -> Vec<String> {
    let k = match rng.random_range(0..20) {
        0 => 0,
        1..=8 => 1,
        9..=17 => 2,
        _ => 3,
    };
    let mut out: Vec<String> = (0..k).map(|_| tags[rng.random_range(0..tags.len())].clone()).collect();
    if rng.random_range(0..40) == 0 {
        out.push("not_a_tag".into());
    }
    out
}

async fn client(app: Router, state: AppState, me: usize, holders: Holders, seed: u64, n: usize, segments: Vec<String>) -> StormReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tags = Taxonomy::builtin().tag_ids();
    let name = format!("client{me}");
    let other = 1 - me;
    let mut r = StormReport::default();
    call(&app, "POST", "/annotators", Some(json!({ "annotator_id": name }))).await;
    let mut held: Option<String> = None;
    for i in 0..n {
        let mut target = None;
        if rng.random_range(0..10) < 5 {
            set_holder(&holders, me, None);
            held = None;
            let before = holder(&holders, other);
            let (s, v) = call(&app, "POST", "/tasks/next", Some(json!({ "annotator_id": name }))).await;
            let after = holder(&holders, other);
            assert_eq!(s, StatusCode::OK);
            if let Some(seg) = v["task"]["segment_id"].as_str() {
                if before == after && before.1.as_deref() == Some(seg) {
                    r.exclusivity_violations.push(format!("{name} got task {seg} while client{other} held it"));
                }
                match state.store.lock_of(seg) {
                    Some(l) if l.owner == name => {}
                    l => r.exclusivity_violations.push(format!("{name} got task {seg} but lock is {l:?}")),
                }
                set_holder(&holders, me, Some(seg.to_owned()));
                held = Some(seg.to_owned());
                // Sometimes keep the task locked and submit elsewhere.
                if rng.random_range(0..10) < 7 {
                    target = Some(seg.to_owned());
                }
            }
        }
        let seg = target.unwrap_or_else(|| match holder(&holders, other).1 {
            Some(theirs) if rng.random_range(0..2) == 0 => theirs,
            _ => segments[rng.random_range(0..segments.len())].clone(),
        });
        let labels = random_labels(&mut rng, &tags);
        let known = labels.iter().all(|l| tags.contains(l));
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        let valid = known && legal(&refs);

        if held.as_deref() == Some(seg.as_str()) {
            set_holder(&holders, me, None);
            held = None;
        }
        let before = holder(&holders, other);
        let body = json!({ "annotator_id": name, "segment_id": seg, "labels": labels });
        let (s, v) = call(&app, "POST", "/submit", Some(body)).await;
        let after = holder(&holders, other);
        let other_held = before == after && before.1.as_deref() == Some(seg.as_str());
        r.submissions += 1;
        let expected_ok = match s {
            StatusCode::OK => {
                if other_held {
                    r.exclusivity_violations.push(format!("{name} wrote {seg} while client{other} held it"));
                }
                if v["duplicate"] == json!(true) {
                    r.duplicates += 1;
                } else {
                    r.accepted += 1;
                }
                valid
            }
            StatusCode::BAD_REQUEST => {
                r.unknown_tag += 1;
                !known
            }
            StatusCode::CONFLICT => {
                r.conflicts += 1;
                known && v["lock"]["owner"] == json!(format!("client{other}"))
            }
            StatusCode::UNPROCESSABLE_ENTITY => {
                r.rejected += 1;
                known && !valid
            }
            _ => false,
        };
        if !expected_ok {
            r.status_mismatches.push(format!("#{i} {name} {seg} {labels:?} -> {s} {v}"));
        }
    }
    r
}

/// Two concurrent clients making `total` submissions between them against a
/// fresh store logging to `log`.
pub async fn storm(log: &Path, total: usize, seed: u64) -> StormReport {
    let convs = synthetic_corpus(120);
    let state = open_state(convs.clone(), log);
    let app = router(state.clone());
    let segments: Vec<String> = state.store.segment_ids().map(str::to_owned).collect();
    let holders: Holders = Arc::new(Mutex::new([(0, None), (0, None)]));
    let mut handles = Vec::new();
    for me in 0..2 {
        let share = total / 2 + if me == 0 { total % 2 } else { 0 };
        handles.push(tokio::spawn(client(
            app.clone(),
            state.clone(),
            me,
            holders.clone(),
            seed + me as u64,
            share,
            segments.clone(),
        )));
    }
    let mut report = StormReport::default();
    for h in handles {
        let c = h.await.unwrap();
        report.submissions += c.submissions;
        report.accepted += c.accepted;
        report.duplicates += c.duplicates;
        report.rejected += c.rejected;
        report.unknown_tag += c.unknown_tag;
        report.conflicts += c.conflicts;
        report.exclusivity_violations.extend(c.exclusivity_violations);
        report.status_mismatches.extend(c.status_mismatches);
    }

    // The raw log is checked line by line with the independent rule oracle.
    let text = std::fs::read_to_string(log).unwrap();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        report.log_records += 1;
        let v: Value = serde_json::from_str(line).unwrap();
        let labels: Vec<&str> = v["labels"].as_array().unwrap().iter().map(|x| x.as_str().unwrap()).collect();
        let known = labels.iter().all(|l| Taxonomy::builtin().tag(l).is_some());
        if !known || !legal(&labels) {
            report.invalid_persisted += 1;
        }
    }
    let replayed = open_state(convs, log);
    report.replay_matches = replayed.store.export() == state.store.export()
        && formats::corpus::read_log(log, &Taxonomy::builtin()).is_ok();
    report
}
