//! JSON over HTTP for the task service.
//!
//! The session is taken from the `x-session` header, or from the
//! `session` query parameter when the header is absent.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use crate::error::{ErrorBody, ServiceError};
use crate::tasks::TaskService;

pub const SESSION_HEADER: &str = "x-session";

type Shared = Arc<TaskService>;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body())).into_response()
    }
}

pub fn router(service: Shared) -> Router {
    Router::new()
        .route("/api/tasks/next", get(next_task))
        .route("/api/tasks/{id}/label", post(label))
        .route("/api/tasks/{id}/skip", post(skip))
        .route("/api/undo", post(undo))
        .route("/api/progress", get(progress))
        .route("/api/images/{image_id}", get(image))
        .fallback(not_found)
        .with_state(service)
}

/// Serves `router(service)` on an already bound listener until the task
/// is cancelled.
pub async fn serve(listener: tokio::net::TcpListener, service: Shared) -> std::io::Result<()> {
    axum::serve(listener, router(service)).await
}

async fn not_found() -> Response {
    let body = ErrorBody {
        code: "NotFound".into(),
        message: "no such endpoint".into(),
    };
    (StatusCode::NOT_FOUND, Json(body)).into_response()
}

fn session(headers: &HeaderMap, query: &HashMap<String, String>) -> Result<String, ServiceError> {
    let from_header = headers.get(SESSION_HEADER).and_then(|v| v.to_str().ok());
    from_header
        .or(query.get("session").map(String::as_str))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .ok_or_else(|| ServiceError::BadRequest(format!("missing {SESSION_HEADER} header or session parameter")))
}

async fn next_task(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ServiceError> {
    let s = session(&headers, &q)?;
    Ok(Json(svc.next_task(&s, Instant::now())?).into_response())
}

#[derive(Deserialize)]
struct LabelBody {
    t: i64,
}

async fn label(
    State(svc): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Query(q): Query<HashMap<String, String>>,
    body: Bytes,
) -> Result<Response, ServiceError> {
    let s = session(&headers, &q)?;
    let body: LabelBody = serde_json::from_slice(&body)
        .map_err(|e| ServiceError::BadRequest(format!("expected {{\"t\": -1|0|1}}: {e}")))?;
    svc.submit_label(&id, body.t, &s, Instant::now())?;
    Ok(Json(json!({ "task_id": id, "status": "labeled" })).into_response())
}

async fn skip(
    State(svc): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ServiceError> {
    let s = session(&headers, &q)?;
    svc.skip(&id, &s, Instant::now())?;
    Ok(Json(json!({ "task_id": id, "status": "skipped" })).into_response())
}

async fn undo(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ServiceError> {
    let s = session(&headers, &q)?;
    let id = svc.undo_last(&s, Instant::now())?;
    Ok(Json(json!({ "task_id": id, "status": "pending" })).into_response())
}

async fn progress(State(svc): State<Shared>) -> Response {
    Json(svc.progress(Instant::now())).into_response()
}

async fn image(State(svc): State<Shared>, Path(image_id): Path<String>) -> Result<Response, ServiceError> {
    let png = svc.image_png(&image_id)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}
