//! The `/v1` HTTP surface. Bodies are parsed by hand so that any malformed
//! input maps to the `MalformedRequest` envelope before anything is
//! touched.

use std::sync::Arc;
use std::time::Duration as StdDuration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;

use securexam::exam::MediaKind;
use securexam::LockdownReport;

use crate::error::ApiError;
use crate::platform::Platform;
use crate::wire::*;

/// Large enough for a package carrying the default resource allowance.
const MAX_BODY: usize = 80 * 1024 * 1024;

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::malformed(format!("invalid request body: {e}")))
}

fn ok<T: Serialize>(r: Result<T, ApiError>) -> ApiResult<T> {
    r.map(Json)
}

fn eq_ct(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers.get(header::AUTHORIZATION)?.to_str().ok()?.strip_prefix("Bearer ")
}

/// Operator identity for the audit trail; the bearer secret authorizes it.
fn actor_id(headers: &HeaderMap, default: &str) -> String {
    headers
        .get("x-actor")
        .and_then(|v| v.to_str().ok())
        .filter(|v| !v.is_empty())
        .unwrap_or(default)
        .to_string()
}

fn require(headers: &HeaderMap, secrets: &[&str]) -> Result<(), ApiError> {
    let presented = bearer(headers).ok_or_else(|| ApiError::unauthorized("missing bearer token"))?;
    if secrets.iter().any(|s| !s.is_empty() && eq_ct(s.as_bytes(), presented.as_bytes())) {
        Ok(())
    } else {
        Err(ApiError::unauthorized("bearer token not accepted"))
    }
}

fn require_admin(p: &Platform, headers: &HeaderMap) -> Result<(), ApiError> {
    require(headers, &[&p.config().admin_token])
}

fn require_invigilator(p: &Platform, headers: &HeaderMap) -> Result<(), ApiError> {
    require(headers, &[p.config().invigilator_secret(), &p.config().admin_token])
}

type AppState = State<Arc<Platform>>;

async fn health(State(p): AppState) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "server_now": p.now() }))
}

async fn upload(State(p): AppState, body: Bytes) -> ApiResult<UploadReceipt> {
    ok(p.upload_package(&body))
}

async fn open_sitting(State(p): AppState, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<SittingOpened> {
    require_admin(&p, &headers)?;
    ok(p.open_sitting(&actor_id(&headers, "admin"), &id))
}

async fn sitting_sessions(State(p): AppState, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Vec<SessionSummary>> {
    require_invigilator(&p, &headers)?;
    ok(p.sitting_sessions(&id))
}

async fn auth(State(p): AppState, body: Bytes) -> ApiResult<AuthGranted> {
    let req: AuthRequest = parse(&body)?;
    ok(p.authenticate(&req))
}

async fn session_view(State(p): AppState, Path(token): Path<String>) -> ApiResult<SessionView> {
    ok(p.session_view(&token))
}

async fn begin(State(p): AppState, Path(token): Path<String>, body: Bytes) -> ApiResult<SessionView> {
    let report: LockdownReport = parse(&body)?;
    ok(p.begin(&token, &report))
}

async fn paper(State(p): AppState, Path(token): Path<String>) -> ApiResult<PaperView> {
    ok(p.paper(&token))
}

async fn resource(State(p): AppState, Path((token, rid)): Path<(String, String)>) -> Result<Response, ApiError> {
    let (kind, bytes) = p.resource(&token, &rid)?;
    let content_type = match kind {
        MediaKind::Text => "text/plain; charset=utf-8",
        MediaKind::HtmlBundle => "application/zip",
        MediaKind::Image => "image/*",
        MediaKind::Video => "video/*",
    };
    Ok(([(header::CONTENT_TYPE, content_type)], bytes).into_response())
}

async fn answer(
    State(p): AppState,
    Path((token, qid)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<securexam::session::AnswerAck> {
    let req: AnswerRequest = parse(&body)?;
    ok(p.answer(&token, &qid, &req))
}

async fn submit(State(p): AppState, Path(token): Path<String>) -> ApiResult<SubmitReceipt> {
    ok(p.submit(&token))
}

async fn confirm(State(p): AppState, Path(sitting): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult<ConfirmOutcome> {
    require_invigilator(&p, &headers)?;
    let req: ConfirmRequest = parse(&body)?;
    ok(p.confirm(&sitting, &req))
}

async fn check(State(p): AppState, body: Bytes) -> ApiResult<ResultView> {
    let req: ResultCheckRequest = parse(&body)?;
    ok(p.check_result(&req))
}

async fn cards(State(p): AppState, headers: HeaderMap, body: Bytes) -> ApiResult<CardIssued> {
    require_admin(&p, &headers)?;
    let req: CardRequest = parse(&body)?;
    ok(p.issue_card(&actor_id(&headers, "admin"), &req))
}

async fn mark(
    State(p): AppState,
    Path((reg_no, exam_id, qid)): Path<(String, String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<securexam::Score> {
    require_admin(&p, &headers)?;
    let req: EssayMarkRequest = parse(&body)?;
    ok(p.mark_essay(&reg_no, &exam_id, &qid, &req))
}

async fn not_found() -> ApiError {
    ApiError::new(404, "NotFound", "no such route")
}

pub fn router(platform: Arc<Platform>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/packages", post(upload))
        .route("/v1/sittings/{id}/open", post(open_sitting))
        .route("/v1/sittings/{id}/sessions", get(sitting_sessions))
        .route("/v1/auth", post(auth))
        .route("/v1/sessions/{token}", get(session_view))
        .route("/v1/sessions/{token}/begin", post(begin))
        .route("/v1/sessions/{token}/paper", get(paper))
        .route("/v1/sessions/{token}/resources/{rid}", get(resource))
        .route("/v1/sessions/{token}/answers/{qid}", put(answer))
        .route("/v1/sessions/{token}/submit", post(submit))
        .route("/v1/invigilator/{sitting}/confirm", post(confirm))
        .route("/v1/results/check", post(check))
        .route("/v1/cards", post(cards))
        .route("/v1/scores/{reg_no}/{exam_id}/essays/{qid}", put(mark))
        .fallback(not_found)
        .layer(DefaultBodyLimit::max(MAX_BODY))
        .with_state(platform)
}

/// Periodically auto-submits sessions whose deadline has passed, so scripts
/// are finalized even when the client has gone quiet.
pub fn spawn_sweeper(platform: Arc<Platform>, every: StdDuration) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(every);
        loop {
            tick.tick().await;
            match platform.sweep() {
                Ok(0) => {}
                Ok(n) => tracing::info!(expired = n, "sessions auto-submitted"),
                Err(e) => tracing::error!(error = %e, "expiry sweep failed"),
            }
        }
    })
}
