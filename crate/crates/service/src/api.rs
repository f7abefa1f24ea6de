//! HTTP routes.
//!
//! | method | path                      | body / result                                  |
//! |--------|---------------------------|------------------------------------------------|
//! | GET    | `/programs`               | list of program summaries                      |
//! | POST   | `/programs`               | document JSON; 201 with the stored program     |
//! | GET    | `/programs/{id}`          | stored program with its document               |
//! | PUT    | `/programs/{id}`          | `{revision, document}`                         |
//! | DELETE | `/programs/{id}`          | 204                                            |
//! | POST   | `/programs/{id}/compile`  | server-sent `status` events, then one `result` |
//! | POST   | `/programs/{id}/run`      | `{inputs}` to `{outputs, input_labels, output_labels}` |
//! | GET    | `/programs/{id}/uses`     | `[{program, compiled, selected}]`              |
//! | PUT    | `/programs/{id}/uses`     | `[names]`                                      |
//! | GET    | `/programs/{id}/export`   | program text                                   |
//!
//! Errors are `{error, message}` plus fields specific to the error.

use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::{Deserialize, Serialize};
use serde_json::json;
use serde_json::value::RawValue;
use tokio::sync::mpsc;
use zoea_core::compile::{CompileEvent, Outcome, RunError};
use zoea_core::graph::Document;
use zoea_core::synth::SearchConfig;
use zoea_core::value::Value;

use crate::store::{Store, StoredProgram};
use crate::workspace::{self, CompileJob};
use crate::ServiceError;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    /// Default search budgets for compiles.
    pub config: SearchConfig,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/programs", get(list).post(create))
        .route("/programs/{id}", get(fetch).put(replace).delete(remove))
        .route("/programs/{id}/compile", post(compile))
        .route("/programs/{id}/run", post(run))
        .route("/programs/{id}/uses", get(uses).put(set_uses))
        .route("/programs/{id}/export", get(export))
        .with_state(state)
}

/// Serves the API until interrupted.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

impl ServiceError {
    fn code(&self) -> (StatusCode, &'static str) {
        use ServiceError::*;
        match self {
            NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            AlreadyExists(_) => (StatusCode::CONFLICT, "already_exists"),
            InvalidId(_) => (StatusCode::BAD_REQUEST, "invalid_id"),
            NameMismatch { .. } => (StatusCode::BAD_REQUEST, "name_mismatch"),
            RevisionConflict { .. } => (StatusCode::CONFLICT, "revision_conflict"),
            InUse(_) => (StatusCode::CONFLICT, "in_use"),
            AlreadyCompiling(_) => (StatusCode::CONFLICT, "already_compiling"),
            ValidationFailed(_) => (StatusCode::UNPROCESSABLE_ENTITY, "validation_failed"),
            BadDocument(_) => (StatusCode::BAD_REQUEST, "bad_document"),
            NotCompiled(_) => (StatusCode::CONFLICT, "not_compiled"),
            StalePipeline { .. } => (StatusCode::CONFLICT, "stale_pipeline"),
            CycleDetected(_) => (StatusCode::CONFLICT, "cycle_detected"),
            Run(RunError::Arity { .. }) => (StatusCode::BAD_REQUEST, "arity_mismatch"),
            Run(_) => (StatusCode::UNPROCESSABLE_ENTITY, "run_error"),
            Compile(_) => (StatusCode::UNPROCESSABLE_ENTITY, "compile_failed"),
            Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage_error"),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, code) = self.code();
        let mut body = json!({ "error": code, "message": self.to_string() });
        let extra = match &self {
            ServiceError::RevisionConflict { current } => json!({ "current": current }),
            ServiceError::InUse(by) => json!({ "by": by }),
            ServiceError::ValidationFailed(d) => json!({ "diagnostics": d }),
            ServiceError::NotCompiled(name) => json!({ "name": name }),
            ServiceError::CycleDetected(path) => json!({ "path": path }),
            ServiceError::StalePipeline {
                pipeline_revision,
                revision,
            } => json!({ "pipeline_revision": pipeline_revision, "revision": revision }),
            _ => json!({}),
        };
        if let (Some(b), Some(e)) = (body.as_object_mut(), extra.as_object()) {
            b.extend(e.clone());
        }
        if status.is_server_error() {
            tracing::error!("{self}");
        }
        (status, Json(body)).into_response()
    }
}

#[derive(Serialize)]
struct Summary {
    id: String,
    revision: u64,
    updated_ms: u64,
    compiled: bool,
}

#[derive(Serialize)]
struct ProgramView {
    id: String,
    revision: u64,
    created_ms: u64,
    updated_ms: u64,
    compiled: bool,
    pipeline_revision: Option<u64>,
    document: Box<RawValue>,
}

fn view(p: &StoredProgram) -> ProgramView {
    ProgramView {
        id: p.id.clone(),
        revision: p.revision,
        created_ms: p.created_ms,
        updated_ms: p.updated_ms,
        compiled: p.is_compiled(),
        pipeline_revision: p.pipeline.as_ref().map(|(_, r)| *r),
        document: RawValue::from_string(p.document.to_json()).expect("document JSON"),
    }
}

fn parse_document(text: &str) -> Result<Document, ServiceError> {
    Document::from_json(text).map_err(|e| ServiceError::BadDocument(e.to_string()))
}

/// Runs blocking store work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("store task panicked")
}

async fn list(State(s): State<AppState>) -> Json<Vec<Summary>> {
    Json(
        s.store
            .list()
            .iter()
            .map(|p| Summary {
                id: p.id.clone(),
                revision: p.revision,
                updated_ms: p.updated_ms,
                compiled: p.is_compiled(),
            })
            .collect(),
    )
}

async fn create(State(s): State<AppState>, body: String) -> Result<impl IntoResponse, ServiceError> {
    let document = parse_document(&body)?;
    let p = blocking(move || s.store.create(document)).await?;
    Ok((StatusCode::CREATED, Json(view(&p))))
}

async fn fetch(State(s): State<AppState>, Path(id): Path<String>) -> Result<Json<ProgramView>, ServiceError> {
    Ok(Json(view(&s.store.get(&id)?)))
}

#[derive(Deserialize)]
struct PutBody {
    revision: u64,
    document: Box<RawValue>,
}

async fn replace(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: String,
) -> Result<Json<ProgramView>, ServiceError> {
    let body: PutBody = serde_json::from_str(&body).map_err(|e| ServiceError::BadDocument(e.to_string()))?;
    let document = parse_document(body.document.get())?;
    let p = blocking(move || s.store.put(&id, body.revision, document)).await?;
    Ok(Json(view(&p)))
}

async fn remove(State(s): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ServiceError> {
    blocking(move || s.store.delete(&id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

/// Optional per-request budget overrides.
#[derive(Deserialize, Default)]
struct Budgets {
    max_cost: Option<u32>,
    timeout_ms: Option<u64>,
    max_candidates: Option<u64>,
}

fn sse_event(e: &CompileEvent) -> Event {
    let name = if e.is_terminal() { "result" } else { "status" };
    Event::default()
        .event(name)
        .data(serde_json::to_string(e).expect("event serializes"))
}

async fn compile(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(b): Query<Budgets>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ServiceError> {
    let mut config = s.config.clone();
    config.max_cost = b.max_cost.unwrap_or(config.max_cost);
    config.timeout_ms = b.timeout_ms.unwrap_or(config.timeout_ms);
    config.max_candidates = b.max_candidates.unwrap_or(config.max_candidates);
    let store = s.store.clone();
    let job = blocking(move || CompileJob::prepare(&store, &id)).await?;
    let (tx, rx) = mpsc::unbounded_channel::<Event>();
    tokio::task::spawn_blocking(move || {
        let id = job.program().id.clone();
        let mut terminal_sent = false;
        let result = job.run(&config, &mut |e| {
            terminal_sent |= e.is_terminal();
            let _ = tx.send(sse_event(e));
        });
        match result {
            Ok(c) => tracing::info!("compiled {id}: {} candidates", c.candidates_expanded()),
            Err(e) => tracing::info!("compile of {id} failed: {e}"),
        }
        if !terminal_sent {
            let _ = tx.send(sse_event(&CompileEvent::Finished {
                result: Outcome::Failure,
                failed: Vec::new(),
            }));
        }
    });
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        rx.recv().await.map(|e| (Ok(e), rx))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

#[derive(Deserialize)]
struct RunBody {
    inputs: Vec<Value>,
}

async fn run(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: String,
) -> Result<Json<workspace::RunResult>, ServiceError> {
    let body: RunBody = serde_json::from_str(&body).map_err(|e| ServiceError::BadDocument(e.to_string()))?;
    let result = blocking(move || workspace::run(&s.store, &id, &body.inputs)).await?;
    Ok(Json(result))
}

async fn uses(State(s): State<AppState>, Path(id): Path<String>) -> Result<Json<Vec<workspace::UseEntry>>, ServiceError> {
    Ok(Json(workspace::uses(&s.store, &id)?))
}

async fn set_uses(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Json(names): Json<Vec<String>>,
) -> Result<Json<ProgramView>, ServiceError> {
    let p = blocking(move || s.store.set_uses(&id, names)).await?;
    Ok(Json(view(&p)))
}

async fn export(State(s): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    let text = workspace::export(&s.store, &id)?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text))
}
