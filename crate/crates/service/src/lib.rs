//! HTTP judging service. Assessors fetch their pools, read documents and post
//! labels; every action is appended to a JSON-lines event file, from which
//! qrels and the activity log are exported.
//!
//! | method | path | purpose |
//! |--------|------|---------|
//! | GET  | `/api/assignments/{assessor}` | topics assigned to an assessor |
//! | GET  | `/api/pool/{assessor}/{topic}` | ordered pool with current labels; logs `open_topic` |
//! | GET  | `/api/doc/{topic}/{doc}?assessor=A` | document HTML; logs `view_doc` when an assessor is given |
//! | POST | `/api/judgment` | record a label, returns the next unjudged document |
//! | GET  | `/api/progress/{assessor}` | judged / total per topic |
//! | GET  | `/api/export/qrels/{version}` | qrels of one version, latest label wins |
//! | GET  | `/api/export/log` | the event file verbatim |

use std::net::SocketAddr;
use std::path::{Path as FsPath, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use poolstat::efficiency::Action;
use poolstat::io::write_qrels;
use poolstat::model::{Qrels, RawLabel};
use poolstat::PoolstatError;
use serde::{Deserialize, Serialize};

pub mod assign;
pub mod store;

pub use assign::{balanced_assignment, Assignment, Catalog};
pub use store::{Clock, EventStore, JudgmentRecord, ManualClock, StoredEvent, SystemClock};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("event file line {line}: {message}")]
    Replay { line: usize, message: String },
    #[error("setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Data(#[from] PoolstatError),
}

impl ServiceError {
    pub(crate) fn io(path: &FsPath, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Shared state behind the router.
pub struct AppState {
    catalog: Catalog,
    store: RwLock<EventStore>,
    clock: Arc<dyn Clock>,
    docs_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(catalog: Catalog, store: EventStore, clock: Arc<dyn Clock>, docs_dir: Option<PathBuf>) -> Arc<Self> {
        Arc::new(Self {
            catalog,
            store: RwLock::new(store),
            clock,
            docs_dir,
        })
    }

    /// Appends under the write lock so timestamps follow sequence order.
    fn record(
        &self,
        assessor: &str,
        topic: &str,
        doc: Option<&str>,
        action: Action,
        label: Option<RawLabel>,
    ) -> Result<StoredEvent, ApiError> {
        let mut store = self.store.write().expect("store lock");
        let ts = self.clock.now_ms();
        store
            .append(ts, assessor, topic, doc, action, label)
            .map_err(|e| ApiError::internal(e.to_string()))
    }

    /// Qrels of one version as currently labelled.
    pub fn export_qrels(&self, version: &str) -> Option<String> {
        if !self.catalog.has_version(version) {
            return None;
        }
        let store = self.store.read().expect("store lock");
        let mut qrels = Qrels::new(version);
        for a in self.catalog.assignments_for_version(version) {
            if let Some(labels) = store.labels(&a.assessor, &a.topic) {
                for (doc, label) in labels {
                    qrels
                        .insert(a.topic.clone(), doc.clone(), label.level())
                        .expect("one label per topicdoc and version");
                }
            }
        }
        let head = format!("qrels version {version}");
        Some(write_qrels(&qrels, &[head.as_str(), "levels: H.REL=2 REL=1 NONREL=0 ERROR=0"]))
    }

    pub fn export_log(&self) -> String {
        self.store.read().expect("store lock").log_text()
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

fn assignment<'a>(state: &'a AppState, assessor: &str, topic: &str) -> Result<&'a Assignment, ApiError> {
    state
        .catalog
        .assignment(assessor, topic)
        .ok_or_else(|| ApiError::not_found(format!("no assignment for assessor {assessor} on topic {topic}")))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicProgress {
    pub topic: String,
    pub judged: usize,
    pub total: usize,
    pub complete: bool,
}

fn progress_of(store: &EventStore, a: &Assignment) -> TopicProgress {
    let judged = store
        .labels(&a.assessor, &a.topic)
        .map_or(0, |m| a.order.iter().filter(|d| m.contains_key(*d)).count());
    TopicProgress {
        topic: a.topic.clone(),
        judged,
        total: a.order.len(),
        complete: judged == a.order.len(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AssignmentsResponse {
    pub assessor: String,
    pub topics: Vec<TopicProgress>,
}

async fn get_assignments(
    State(state): State<Arc<AppState>>,
    Path(assessor): Path<String>,
) -> Result<Json<AssignmentsResponse>, ApiError> {
    let store = state.store.read().expect("store lock");
    let topics: Vec<TopicProgress> = state.catalog.assignments_of(&assessor).map(|a| progress_of(&store, a)).collect();
    if topics.is_empty() {
        return Err(ApiError::not_found(format!("unknown assessor {assessor}")));
    }
    Ok(Json(AssignmentsResponse { assessor, topics }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DocEntry {
    pub doc: String,
    pub label: Option<RawLabel>,
}

/// Assessor-facing pool: no run statistics, no version or strategy name.
#[derive(Debug, Serialize, Deserialize)]
pub struct PoolResponse {
    pub topic: String,
    pub content: Option<String>,
    pub description: Option<String>,
    pub documents: Vec<DocEntry>,
    pub judged: usize,
    pub total: usize,
}

async fn get_pool(
    State(state): State<Arc<AppState>>,
    Path((assessor, topic)): Path<(String, String)>,
) -> Result<Json<PoolResponse>, ApiError> {
    let a = assignment(&state, &assessor, &topic)?;
    state.record(&assessor, &topic, None, Action::OpenTopic, None)?;
    let store = state.store.read().expect("store lock");
    let documents: Vec<DocEntry> = a
        .order
        .iter()
        .map(|d| DocEntry {
            doc: d.clone(),
            label: store.label(&assessor, &topic, d),
        })
        .collect();
    let progress = progress_of(&store, a);
    let info = state.catalog.topic(&topic);
    Ok(Json(PoolResponse {
        topic,
        content: info.map(|t| t.content.clone()),
        description: info.map(|t| t.description.clone()),
        documents,
        judged: progress.judged,
        total: progress.total,
    }))
}

#[derive(Debug, Deserialize)]
struct DocQuery {
    assessor: Option<String>,
}

fn safe_doc_id(doc: &str) -> bool {
    !doc.is_empty() && !doc.starts_with('.') && !doc.contains(['/', '\\'])
}

async fn get_doc(
    State(state): State<Arc<AppState>>,
    Path((topic, doc)): Path<(String, String)>,
    Query(q): Query<DocQuery>,
) -> Result<Response, ApiError> {
    if !safe_doc_id(&doc) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, format!("bad document id {doc:?}")));
    }
    let dir = state
        .docs_dir
        .as_ref()
        .ok_or_else(|| ApiError::not_found("no document directory configured"))?;
    let path = dir.join(format!("{doc}.html"));
    let body = tokio::fs::read(&path)
        .await
        .map_err(|_| ApiError::not_found(format!("document {doc} not available")))?;
    if let Some(assessor) = q.assessor {
        assignment(&state, &assessor, &topic)?;
        state.record(&assessor, &topic, Some(&doc), Action::ViewDoc, None)?;
    }
    Ok(([(header::CONTENT_TYPE, "text/html; charset=utf-8")], body).into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JudgmentRequest {
    pub assessor: String,
    pub topic: String,
    pub doc: String,
    pub label: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JudgmentResponse {
    pub seq: u64,
    pub doc: String,
    pub label: RawLabel,
    /// The document already carried a different label.
    pub correction: bool,
    /// First unjudged document in presentation order.
    pub next: Option<String>,
    pub judged: usize,
    pub total: usize,
    pub complete: bool,
}

async fn post_judgment(
    State(state): State<Arc<AppState>>,
    Json(req): Json<JudgmentRequest>,
) -> Result<Json<JudgmentResponse>, ApiError> {
    let a = assignment(&state, &req.assessor, &req.topic)?;
    if !a.contains(&req.doc) {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("document {} is not in the pool of topic {}", req.doc, req.topic),
        ));
    }
    let label: RawLabel = req
        .label
        .parse()
        .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, format!("bad label {:?}", req.label)))?;
    let previous = state.store.read().expect("store lock").label(&req.assessor, &req.topic, &req.doc);
    let event = state.record(&req.assessor, &req.topic, Some(&req.doc), Action::Judge, Some(label))?;
    let store = state.store.read().expect("store lock");
    let labels = store.labels(&req.assessor, &req.topic);
    let next = a
        .order
        .iter()
        .find(|d| labels.is_none_or(|m| !m.contains_key(*d)))
        .cloned();
    let progress = progress_of(&store, a);
    Ok(Json(JudgmentResponse {
        seq: event.seq,
        doc: req.doc,
        label,
        correction: previous.is_some_and(|p| p != label),
        next,
        judged: progress.judged,
        total: progress.total,
        complete: progress.complete,
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProgressResponse {
    pub assessor: String,
    pub judged: usize,
    pub total: usize,
    pub topics: Vec<TopicProgress>,
}

async fn get_progress(
    State(state): State<Arc<AppState>>,
    Path(assessor): Path<String>,
) -> Result<Json<ProgressResponse>, ApiError> {
    let store = state.store.read().expect("store lock");
    let topics: Vec<TopicProgress> = state.catalog.assignments_of(&assessor).map(|a| progress_of(&store, a)).collect();
    if topics.is_empty() {
        return Err(ApiError::not_found(format!("unknown assessor {assessor}")));
    }
    Ok(Json(ProgressResponse {
        judged: topics.iter().map(|t| t.judged).sum(),
        total: topics.iter().map(|t| t.total).sum(),
        assessor,
        topics,
    }))
}

async fn export_qrels(State(state): State<Arc<AppState>>, Path(version): Path<String>) -> Result<Response, ApiError> {
    let text = state
        .export_qrels(&version)
        .ok_or_else(|| ApiError::not_found(format!("unknown qrels version {version}")))?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response())
}

async fn export_log(State(state): State<Arc<AppState>>) -> Response {
    ([(header::CONTENT_TYPE, "application/x-ndjson")], state.export_log()).into_response()
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/assignments/{assessor}", get(get_assignments))
        .route("/api/pool/{assessor}/{topic}", get(get_pool))
        .route("/api/doc/{topic}/{doc}", get(get_doc))
        .route("/api/judgment", post(post_judgment))
        .route("/api/progress/{assessor}", get(get_progress))
        .route("/api/export/qrels/{version}", get(export_qrels))
        .route("/api/export/log", get(export_log))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| ServiceError::Setup(format!("cannot bind {addr}: {e}")))?;
    log::info!("listening on {addr}");
    axum::serve(listener, router(state))
        .await
        .map_err(|e| ServiceError::Setup(e.to_string()))
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/service.md")]
mod book_chapter {}
