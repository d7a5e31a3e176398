//! HTTP+JSON front end for an [`AnnotationStore`].
//!
//! | method | path | result |
//! |---|---|---|
//! | GET | `/records?annotator=<id>&status=pending` | records the annotator has not judged |
//! | GET | `/records` | every record |
//! | POST | `/judgments` | 201 with the stored judgment |
//! | GET | `/adjudications/{record_id}` | current adjudicated label |
//! | GET | `/export?min_votes=N` | resolved records as JSONL |
//!
//! Errors are `{"error": "..."}` with 400, 403 (annotator rejected by
//! policy), 404 (unknown record, or no judgments yet) or 500 (journal write).

use std::future::Future;
use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::Deserialize;
use tokio::net::TcpListener;

use sentiment_core::annotate::{AnnotateError, AnnotationStore, Judgment};
use sentiment_core::corpus::{write_records, Format, SentimentLabel};

pub type SharedStore = Arc<RwLock<AnnotationStore>>;

pub fn shared(store: AnnotationStore) -> SharedStore {
    Arc::new(RwLock::new(store))
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
}

impl From<AnnotateError> for ApiError {
    fn from(e: AnnotateError) -> Self {
        let status = match e {
            AnnotateError::UnknownRecord(_) | AnnotateError::NoJudgments(_) => StatusCode::NOT_FOUND,
            AnnotateError::UnknownAnnotator(_) => StatusCode::FORBIDDEN,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

#[derive(Debug, Deserialize)]
struct RecordsQuery {
    annotator: Option<String>,
    status: Option<String>,
}

async fn list_records(State(store): State<SharedStore>, Query(q): Query<RecordsQuery>) -> Result<Response, ApiError> {
    let store = store.read().expect("store lock");
    let records: Vec<_> = match (q.status.as_deref(), q.annotator.as_deref()) {
        (None | Some("all"), _) => store.records().iter().collect(),
        (Some("pending"), Some(annotator)) => store.pending_for(annotator),
        (Some("pending"), None) => return Err(ApiError::new(StatusCode::BAD_REQUEST, "status=pending needs an annotator")),
        (Some(other), _) => return Err(ApiError::new(StatusCode::BAD_REQUEST, format!("unknown status {other:?}"))),
    };
    Ok(Json(records).into_response())
}

#[derive(Debug, Deserialize)]
struct JudgmentBody {
    record_id: String,
    annotator_id: String,
    label: SentimentLabel,
}

async fn post_judgment(State(store): State<SharedStore>, Json(body): Json<JudgmentBody>) -> Result<Response, ApiError> {
    if body.annotator_id.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "annotator_id must be non-empty"));
    }
    let judgment = Judgment {
        record_id: body.record_id,
        annotator_id: body.annotator_id,
        label: body.label,
        timestamp: Utc::now(),
    };
    let stored = store.write().expect("store lock").submit_judgment(judgment)?;
    log::info!("{} judged {} {}", stored.annotator_id, stored.record_id, stored.label);
    Ok((StatusCode::CREATED, Json(stored)).into_response())
}

async fn get_adjudication(State(store): State<SharedStore>, Path(record_id): Path<String>) -> Result<Response, ApiError> {
    let adj = store.read().expect("store lock").adjudicate(&record_id)?;
    Ok(Json(adj).into_response())
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    min_votes: Option<usize>,
}

async fn export(State(store): State<SharedStore>, Query(q): Query<ExportQuery>) -> Result<Response, ApiError> {
    let records = store.read().expect("store lock").export_labeled(q.min_votes.unwrap_or(1));
    let mut body = Vec::new();
    write_records(&mut body, &records, Format::Jsonl).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

pub fn router(store: SharedStore) -> Router {
    Router::new()
        .route("/records", get(list_records))
        .route("/judgments", post(post_judgment))
        .route("/adjudications/{record_id}", get(get_adjudication))
        .route("/export", get(export))
        .with_state(store)
}

/// Serves until `shutdown` resolves.
pub async fn serve(listener: TcpListener, store: SharedStore, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
    axum::serve(listener, router(store)).with_graceful_shutdown(shutdown).await
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn run(addr: SocketAddr, store: SharedStore) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    log::info!("annotation service listening on http://{}", listener.local_addr()?);
    serve(listener, store, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
