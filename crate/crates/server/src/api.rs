//! JSON endpoints under `/api/v1`, plus optional static file serving at `/`.

use std::path::Path;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use phishwatch_core::engine::Engine;
use phishwatch_core::extract::extract_urls;
use phishwatch_core::ftw::Lookup;
use phishwatch_core::model::{Verdict, VerdictSource, VerdictStatus};
use phishwatch_core::url::normalize;

use crate::feedback::{Decision, FeedbackStore, ProposedStatus, ReviewError};

pub const MAX_BATCH: usize = 1000;
pub const MAX_TEXT_BYTES: usize = 1024 * 1024;
/// Raw body cap for detect-text: the text limit plus room for JSON escaping.
const MAX_TEXT_BODY: usize = 8 * MAX_TEXT_BYTES;
pub const REVIEW_TOKEN_HEADER: &str = "x-review-token";
pub const DEFAULT_WINDOW_DAYS: i64 = 30;

#[derive(Clone)]
pub struct ApiState {
    pub engine: Arc<Engine>,
    pub feedback: Arc<FeedbackStore>,
    pub review_token: Option<String>,
}

impl ApiState {
    pub fn new(engine: Arc<Engine>) -> Self {
        let feedback = Arc::new(FeedbackStore::new(engine.cache().clone(), engine.clock().clone()));
        let review_token = engine.config().api_review_token.clone();
        Self {
            engine,
            feedback,
            review_token,
        }
    }
}

pub fn router(state: ApiState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/v1/detect", post(detect))
        .route("/api/v1/detect-text", post(detect_text))
        .route("/api/v1/result", get(result))
        .route("/api/v1/feedback", post(submit_feedback))
        .route("/api/v1/feedback/{id}/review", post(review_feedback))
        .route("/api/v1/stats", get(stats))
        .route("/api/v1/health", get(health))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl ApiError {
    fn bad_request(msg: impl Into<String>) -> Self {
        Self(StatusCode::BAD_REQUEST, msg.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

impl From<ReviewError> for ApiError {
    fn from(err: ReviewError) -> Self {
        let status = match err {
            ReviewError::NotFound(_) => StatusCode::NOT_FOUND,
            ReviewError::AlreadyReviewed(_) => StatusCode::CONFLICT,
            ReviewError::Cache(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self(status, err.to_string())
    }
}

fn parse_json<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

/// Wire form of a verdict. `status` also takes the value `unknown`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictView {
    pub url: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<VerdictSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_brand: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decided_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl VerdictView {
    pub fn new(url: impl Into<String>, v: Verdict) -> Self {
        Self {
            url: url.into(),
            status: v.status.as_str().to_string(),
            source: Some(v.source),
            target_brand: v.target_brand,
            decided_at: Some(v.decided_at),
            detail: v.detail,
        }
    }

    fn unknown(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            status: "unknown".into(),
            source: None,
            target_brand: None,
            decided_at: None,
            detail: None,
        }
    }
}

#[derive(Deserialize)]
struct DetectRequest {
    urls: Vec<String>,
}

fn run_detect(state: &ApiState, urls: &[String]) -> Vec<VerdictView> {
    state
        .engine
        .ftw()
        .process_raw_batch(urls)
        .into_iter()
        .zip(urls)
        .map(|(v, raw)| VerdictView::new(raw.clone(), v))
        .collect()
}

async fn detect(State(state): State<ApiState>, body: Bytes) -> Result<Json<Vec<VerdictView>>, ApiError> {
    let req: DetectRequest = parse_json(&body)?;
    if req.urls.is_empty() || req.urls.len() > MAX_BATCH {
        return Err(ApiError::bad_request(format!(
            "urls must hold 1 to {MAX_BATCH} entries"
        )));
    }
    Ok(Json(run_detect(&state, &req.urls)))
}

#[derive(Deserialize)]
struct DetectTextRequest {
    text: String,
}

#[derive(Serialize, Deserialize)]
pub struct DetectTextResponse {
    pub extracted_urls: Vec<String>,
    pub verdicts: Vec<VerdictView>,
}

async fn detect_text(State(state): State<ApiState>, body: Body) -> Result<Json<DetectTextResponse>, ApiError> {
    let bytes = axum::body::to_bytes(body, MAX_TEXT_BODY)
        .await
        .map_err(|_| ApiError::bad_request("body too large"))?;
    let req: DetectTextRequest = parse_json(&bytes)?;
    if req.text.len() > MAX_TEXT_BYTES {
        return Err(ApiError::bad_request(format!("text exceeds {MAX_TEXT_BYTES} bytes")));
    }
    let urls = extract_urls(&req.text);
    let verdicts = if urls.is_empty() {
        Vec::new()
    } else {
        urls.chunks(MAX_BATCH)
            .flat_map(|chunk| run_detect(&state, chunk))
            .collect()
    };
    Ok(Json(DetectTextResponse {
        extracted_urls: urls,
        verdicts,
    }))
}

#[derive(Deserialize)]
struct ResultQuery {
    url: Option<String>,
}

async fn result(State(state): State<ApiState>, Query(q): Query<ResultQuery>) -> Result<Json<VerdictView>, ApiError> {
    let raw = q.url.ok_or_else(|| ApiError::bad_request("missing url parameter"))?;
    let url = normalize(&raw).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let view = match state.engine.ftw().lookup(&url) {
        Lookup::Known(v) => VerdictView::new(raw, v),
        Lookup::Unknown => match state.engine.queue().tracked(&url) {
            Some(t) => VerdictView::new(raw, Verdict::pending(t.enqueued_at)),
            None => VerdictView::unknown(raw),
        },
    };
    Ok(Json(view))
}

#[derive(Deserialize)]
struct FeedbackRequest {
    url: String,
    proposed_status: ProposedStatus,
    #[serde(default)]
    proposed_brand: Option<String>,
    #[serde(default)]
    comment: String,
}

async fn submit_feedback(State(state): State<ApiState>, body: Bytes) -> Result<Response, ApiError> {
    let req: FeedbackRequest = parse_json(&body)?;
    let url = normalize(&req.url).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let record = state
        .feedback
        .submit(&url, req.proposed_status, req.proposed_brand, req.comment);
    Ok((StatusCode::CREATED, Json(record)).into_response())
}

#[derive(Deserialize)]
struct ReviewRequest {
    decision: Decision,
}

async fn review_feedback(
    State(state): State<ApiState>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let Some(expected) = state.review_token.as_deref() else {
        return Err(ApiError(
            StatusCode::FORBIDDEN,
            "review is disabled (no api.review_token)".into(),
        ));
    };
    let given = headers.get(REVIEW_TOKEN_HEADER).and_then(|v| v.to_str().ok());
    if given != Some(expected) {
        return Err(ApiError(StatusCode::UNAUTHORIZED, "bad or missing review token".into()));
    }
    let req: ReviewRequest = parse_json(&body)?;
    let record = state.feedback.review(&id, req.decision)?;
    Ok(Json(record).into_response())
}

#[derive(Deserialize)]
struct StatsQuery {
    window_days: Option<String>,
}

async fn stats(State(state): State<ApiState>, Query(q): Query<StatsQuery>) -> Result<Response, ApiError> {
    let days = match q.window_days.as_deref() {
        None => DEFAULT_WINDOW_DAYS,
        Some(s) => s
            .trim()
            .parse::<i64>()
            .map_err(|_| ApiError::bad_request("window_days must be an integer"))?,
    };
    if days < 1 {
        return Err(ApiError::bad_request("window_days must be at least 1"));
    }
    let days = u32::try_from(days).unwrap_or(u32::MAX);
    Ok(Json(state.engine.cache().aggregate_stats(days)).into_response())
}

async fn health(State(state): State<ApiState>) -> Response {
    Json(state.engine.health()).into_response()
}

/// True when a verdict is one a client should keep polling.
pub fn is_pending(view: &VerdictView) -> bool {
    view.status == VerdictStatus::Pending.as_str()
}
