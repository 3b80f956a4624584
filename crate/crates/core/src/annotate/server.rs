//! HTTP JSON API over the annotation store.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::label::Label;
use super::store::{AnnotationStore, Progress};
use crate::corpus::{parse_chunk_id, Chunk};
use crate::error::{Error, Result};

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

/// Chunks grouped by document, in sequence order.
#[derive(Debug, Default)]
pub struct ChunkTable {
    by_doc: HashMap<String, Vec<Chunk>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextChunk {
    pub chunk_id: String,
    pub text: String,
    pub focus: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextResponse {
    pub doc_id: String,
    pub chunk_id: String,
    pub chunks: Vec<ContextChunk>,
}

impl ChunkTable {
    pub fn new(chunks: Vec<Chunk>) -> Self {
        let mut by_doc: HashMap<String, Vec<Chunk>> = HashMap::new();
        for c in chunks {
            by_doc.entry(c.doc_id.clone()).or_default().push(c);
        }
        for v in by_doc.values_mut() {
            v.sort_by_key(|c| c.token_start);
        }
        Self { by_doc }
    }

    /// The chunk plus up to `radius` neighbours on each side.
    pub fn context(&self, chunk_id: &str, radius: usize) -> Option<ContextResponse> {
        let (doc_id, seq) = parse_chunk_id(chunk_id)?;
        let chunks = self.by_doc.get(doc_id)?;
        let pos = chunks
            .iter()
            .position(|c| c.chunk_id == chunk_id)
            .or_else(|| (seq < chunks.len() && chunks[seq].chunk_id == chunk_id).then_some(seq))?;
        let lo = pos.saturating_sub(radius);
        let hi = (pos + radius + 1).min(chunks.len());
        Some(ContextResponse {
            doc_id: doc_id.to_owned(),
            chunk_id: chunk_id.to_owned(),
            chunks: chunks[lo..hi]
                .iter()
                .map(|c| ContextChunk {
                    chunk_id: c.chunk_id.clone(),
                    text: c.text.clone(),
                    focus: c.chunk_id == chunk_id,
                })
                .collect(),
        })
    }
}

pub struct AppState {
    pub store: RwLock<AnnotationStore>,
    pub chunks: ChunkTable,
    pub threshold: f64,
    pub clock: Clock,
}

impl AppState {
    pub fn new(store: AnnotationStore, chunks: ChunkTable, threshold: f64) -> Self {
        Self {
            store: RwLock::new(store),
            chunks,
            threshold,
            clock: Arc::new(Utc::now),
        }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }
}

type Shared = Arc<AppState>;

fn error_response(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QuerySummary {
    pub query_id: String,
    pub quote_text: String,
    #[serde(flatten)]
    pub progress: Progress,
}

async fn list_queries(State(state): State<Shared>) -> Response {
    let store = state.store.read().unwrap();
    let summaries: Vec<QuerySummary> = store
        .query_ids()
        .into_iter()
        .map(|q| QuerySummary {
            quote_text: store
                .candidates()
                .find(|c| c.query_id == q)
                .map(|c| c.quote_text.clone())
                .unwrap_or_default(),
            progress: store.progress(&q, state.threshold),
            query_id: q,
        })
        .collect();
    Json(summaries).into_response()
}

#[derive(Deserialize)]
struct NextParams {
    annotator: String,
    query: Option<String>,
}

async fn next(State(state): State<Shared>, Query(p): Query<NextParams>) -> Response {
    if p.annotator.trim().is_empty() {
        return error_response(StatusCode::BAD_REQUEST, "annotator is required");
    }
    let now = (state.clock)();
    let next =
        state
            .store
            .write()
            .unwrap()
            .next_candidate_for(&p.annotator, p.query.as_deref(), now);
    match next {
        Some(c) => Json(c).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LabelRequest {
    pub candidate_id: String,
    pub label: String,
    pub annotator: String,
    pub duration_seconds: f64,
}

async fn label(State(state): State<Shared>, Json(req): Json<LabelRequest>) -> Response {
    let label: Label = match req.label.parse() {
        Ok(l) => l,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let now = (state.clock)();
    let result = state.store.write().unwrap().submit_label(
        &req.candidate_id,
        label,
        &req.annotator,
        req.duration_seconds,
        now,
    );
    match result {
        Ok(a) => Json(a).into_response(),
        Err(e @ Error::UnknownCandidate(_)) => error_response(StatusCode::NOT_FOUND, e.to_string()),
        Err(e) => error_response(StatusCode::BAD_REQUEST, e.to_string()),
    }
}

#[derive(Deserialize)]
struct ProgressParams {
    query: String,
}

async fn progress(State(state): State<Shared>, Query(p): Query<ProgressParams>) -> Response {
    let store = state.store.read().unwrap();
    if !store.candidates().any(|c| c.query_id == p.query) {
        return error_response(
            StatusCode::NOT_FOUND,
            format!("unknown query {:?}", p.query),
        );
    }
    Json(store.progress(&p.query, state.threshold)).into_response()
}

#[derive(Deserialize)]
struct ContextParams {
    chunk: String,
    radius: Option<usize>,
}

async fn context(State(state): State<Shared>, Query(p): Query<ContextParams>) -> Response {
    match state.chunks.context(&p.chunk, p.radius.unwrap_or(2)) {
        Some(ctx) => Json(ctx).into_response(),
        None => error_response(
            StatusCode::NOT_FOUND,
            format!("unknown chunk {:?}", p.chunk),
        ),
    }
}

#[derive(Deserialize)]
struct ExportParams {
    query: Option<String>,
}

async fn export(State(state): State<Shared>, Query(p): Query<ExportParams>) -> Response {
    let records = state.store.read().unwrap().export(p.query.as_deref());
    let mut body = Vec::new();
    if let Err(e) = crate::jsonl::write_to(&mut body, &records) {
        return error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string());
    }
    (
        [(header::CONTENT_TYPE, "application/x-ndjson; charset=utf-8")],
        body,
    )
        .into_response()
}

/// Builds the API router. When `ui_dir` is given, other paths are served
/// from it as static files.
pub fn router(state: Shared, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/queries", get(list_queries))
        .route("/api/next", get(next))
        .route("/api/label", post(label))
        .route("/api/progress", get(progress))
        .route("/api/context", get(context))
        .route("/api/export", get(export))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(state: Shared, addr: SocketAddr, ui_dir: Option<PathBuf>) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(addr.to_string(), e))?;
    axum::serve(listener, router(state, ui_dir))
        .await
        .map_err(|e| Error::io(addr.to_string(), e))
}
