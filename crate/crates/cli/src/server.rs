//! HTTP API of the annotation mode.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pitchlines::dataset::resolve_image;
use pitchlines::{AnnotationSession, Error, SegmentRecord};
use serde::{Deserialize, Serialize};

pub struct AppState {
    pub session: RwLock<AnnotationSession>,
    pub session_path: PathBuf,
}

pub type Shared = Arc<AppState>;

#[derive(Debug, Serialize)]
pub struct IndexedRecord<'a> {
    pub index: usize,
    #[serde(flatten)]
    pub record: &'a SegmentRecord,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRequest {
    pub index: usize,
    pub label: String,
}

const INDEX_HTML: &str = include_str!("index.html");

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/", get(index))
        .route("/api/images", get(images))
        .route("/api/records", get(records))
        .route("/api/label", post(label))
        .route("/api/image/{*path}", get(image))
        .with_state(state)
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

async fn index() -> Html<&'static str> {
    Html(INDEX_HTML)
}

async fn images(State(state): State<Shared>) -> Response {
    let session = state.session.read().expect("session lock poisoned");
    Json(&session.images).into_response()
}

async fn records(State(state): State<Shared>, Query(q): Query<HashMap<String, String>>) -> Response {
    let Some(image) = q.get("image") else {
        return error(StatusCode::BAD_REQUEST, "missing image query parameter");
    };
    let session = state.session.read().expect("session lock poisoned");
    if !session.images.contains(image) {
        return error(StatusCode::NOT_FOUND, format!("image {image:?} not in session"));
    }
    let out: Vec<IndexedRecord> = session
        .records_for(image)
        .map(|(index, record)| IndexedRecord { index, record })
        .collect();
    Json(out).into_response()
}

async fn label(State(state): State<Shared>, body: Result<Json<LabelRequest>, JsonRejection>) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    let mut session = state.session.write().expect("session lock poisoned");
    match session.set_label(&state.session_path, req.index, &req.label) {
        Ok(()) => {
            log::info!("record {} labeled {}", req.index, req.label);
            Json(IndexedRecord {
                index: req.index,
                record: &session.records[req.index],
            })
            .into_response()
        }
        Err(e @ (Error::Index { .. } | Error::InvalidLabel(_))) => error(StatusCode::BAD_REQUEST, e.to_string()),
        Err(e) => {
            let message = match std::error::Error::source(&e) {
                Some(cause) => format!("{e}: {cause}"),
                None => e.to_string(),
            };
            log::error!("{message}");
            error(StatusCode::INTERNAL_SERVER_ERROR, message)
        }
    }
}

async fn image(State(state): State<Shared>, UrlPath(path): UrlPath<String>) -> Response {
    // absolute keys lose their leading slash in the URL
    let key = {
        let session = state.session.read().expect("session lock poisoned");
        [path.clone(), format!("/{path}")]
            .into_iter()
            .find(|k| session.images.contains(k))
    };
    let Some(key) = key else {
        return error(StatusCode::NOT_FOUND, format!("image {path:?} not in session"));
    };
    let file = resolve_image(&state.session_path, &key);
    let mime = match file.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("ppm") => "image/x-portable-pixmap",
        _ => "application/octet-stream",
    };
    match tokio::fs::read(&file).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, mime)], bytes).into_response(),
        Err(e) => error(StatusCode::NOT_FOUND, format!("{}: {e}", file.display())),
    }
}
