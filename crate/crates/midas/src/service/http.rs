//! JSON-over-HTTP API.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | GET | `/health` | | counts and model version |
//! | GET | `/scheme` | | tags with tree paths, exclusivity rules |
//! | POST | `/validate` | `{labels}` | `{ok, violations}` |
//! | POST | `/annotators` | `{annotator_id}` | `{annotator_id, created}` |
//! | POST | `/tasks/next` | `{annotator_id}` | `{task}`; `task` is null when done |
//! | POST | `/submit` | `{annotator_id, segment_id, labels, completed_text?}` | `{status, duplicate, record}` |
//! | GET | `/suggest/{segment_id}` | | `{enabled, suggestion?}` |
//! | GET | `/agreement` | | per-pair kappa and coverage |
//! | GET | `/export` | | annotated corpus as JSON lines |
//! | POST | `/export` | | writes the configured export file |
//!
//! Errors are `{"error": <code>, "detail": <text>}`. A rejected label set is
//! 422 with `violations`; a live lock held by someone else is 409.

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use super::store::{AnnotationStore, StoreError};

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<AnnotationStore>,
    pub export_path: Option<PathBuf>,
}

pub struct ApiError(StatusCode, Value);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::EmptyAnnotator | StoreError::UnknownTag(_) => StatusCode::BAD_REQUEST,
            StoreError::UnknownAnnotator(_) | StoreError::UnknownSegment(_) => StatusCode::NOT_FOUND,
            StoreError::Rejected(_) | StoreError::Context(_) => StatusCode::UNPROCESSABLE_ENTITY,
            StoreError::LockedByOther { .. } => StatusCode::CONFLICT,
            StoreError::Log(_) | StoreError::Replay { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut body = json!({ "error": e.code(), "detail": e.to_string() });
        match &e {
            StoreError::Rejected(v) => {
                body["status"] = json!("rejected");
                body["violations"] = json!(v);
            }
            StoreError::LockedByOther { owner, expires_at, .. } => {
                body["lock"] = json!({ "owner": owner, "expires_at": expires_at });
            }
            _ => {}
        }
        ApiError(status, body)
    }
}

fn bad_request(detail: impl ToString) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, json!({ "error": "bad_request", "detail": detail.to_string() }))
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(t)| t).map_err(|e| bad_request(e.body_text()))
}

#[derive(Deserialize)]
struct AnnotatorBody {
    annotator_id: String,
}

#[derive(Deserialize)]
struct SubmitBody {
    annotator_id: String,
    segment_id: String,
    labels: Vec<String>,
    #[serde(default)]
    completed_text: Option<String>,
}

#[derive(Deserialize)]
struct LabelsBody {
    labels: Vec<String>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/scheme", get(scheme))
        .route("/validate", post(validate))
        .route("/annotators", post(register))
        .route("/tasks/next", post(next_task))
        .route("/submit", post(submit))
        .route("/suggest/{segment_id}", get(suggest))
        .route("/agreement", get(agreement))
        .route("/export", get(export).post(export_to_file))
        .with_state(state)
}

async fn health(State(s): State<AppState>) -> Json<Value> {
    let h = s.store.health();
    Json(json!({ "status": "ok", "segments": h.segments, "annotators": h.annotators, "records": h.records, "model": h.model }))
}

async fn scheme(State(s): State<AppState>) -> Json<Value> {
    let tax = s.store.taxonomy();
    let tags: Vec<Value> = tax
        .tags()
        .iter()
        .map(|t| {
            json!({
                "id": t.id,
                "display_name": t.display_name,
                "path": t.path,
                "group": t.group,
                "description": t.description,
                "example": t.example,
            })
        })
        .collect();
    let nodes: Vec<Value> = tax
        .spec()
        .nodes
        .iter()
        .map(|n| json!({ "kind": n.kind, "name": n.name, "parent": n.parent, "display_name": n.display_name }))
        .collect();
    Json(json!({
        "max_tags": midas_core::taxonomy::MAX_TAGS,
        "tags": tags,
        "nodes": nodes,
        "exclusive": tax.exclusive_rules(),
    }))
}

async fn validate(State(s): State<AppState>, payload: Result<Json<LabelsBody>, JsonRejection>) -> Result<Json<Value>, ApiError> {
    let b = body(payload)?;
    let v = s.store.taxonomy().validate(&b.labels).map_err(StoreError::from)?;
    Ok(Json(json!({ "ok": v.is_ok(), "violations": v.violations })))
}

async fn register(
    State(s): State<AppState>,
    payload: Result<Json<AnnotatorBody>, JsonRejection>,
) -> Result<Json<Value>, ApiError> {
    let b = body(payload)?;
    let created = s.store.register(&b.annotator_id)?;
    Ok(Json(json!({ "annotator_id": b.annotator_id.trim(), "created": created })))
}

async fn next_task(
    State(s): State<AppState>,
    payload: Result<Json<AnnotatorBody>, JsonRejection>,
) -> Result<Json<Value>, ApiError> {
    let b = body(payload)?;
    let task = s.store.next_task(&b.annotator_id)?;
    Ok(Json(json!({ "task": task })))
}

async fn submit(State(s): State<AppState>, payload: Result<Json<SubmitBody>, JsonRejection>) -> Result<Json<Value>, ApiError> {
    let b = body(payload)?;
    let r = s.store.submit(&b.annotator_id, &b.segment_id, &b.labels, b.completed_text.as_deref())?;
    Ok(Json(json!({ "status": "accepted", "duplicate": r.duplicate, "record": r.record })))
}

async fn suggest(State(s): State<AppState>, Path(segment_id): Path<String>) -> Result<Json<Value>, ApiError> {
    Ok(Json(match s.store.suggest(&segment_id)? {
        Some(sug) => json!({ "enabled": true, "suggestion": sug }),
        None => json!({ "enabled": false }),
    }))
}

async fn agreement(State(s): State<AppState>) -> Json<Value> {
    Json(json!(s.store.agreement()))
}

async fn export(State(s): State<AppState>) -> Response {
    ([(header::CONTENT_TYPE, "application/x-ndjson")], s.store.export()).into_response()
}

async fn export_to_file(State(s): State<AppState>) -> Result<Json<Value>, ApiError> {
    let Some(path) = &s.export_path else {
        return Err(ApiError(
            StatusCode::CONFLICT,
            json!({ "error": "export_disabled", "detail": "no export path configured" }),
        ));
    };
    let text = s.store.export();
    std::fs::write(path, &text).map_err(|e| StoreError::Log(format!("{}: {e}", path.display())))?;
    Ok(Json(json!({ "written": path.display().to_string(), "conversations": text.lines().count() })))
}
