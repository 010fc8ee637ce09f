//! HTTP/JSON routes. Field names are documented in `docs/api.md`.

use std::future::Future;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use crowdlabel_core::annotation::{
    AnnotationError, AssignmentId, DemographicsForm, JudgmentInput, RoundProgress,
};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

use crate::error::ServiceError;
use crate::export::ExportVariant;
use crate::platform::{Analysis, Platform};

pub type SharedPlatform = Arc<Mutex<Platform>>;

pub fn shared(platform: Platform) -> SharedPlatform {
    Arc::new(Mutex::new(platform))
}

fn lock(state: &SharedPlatform) -> MutexGuard<'_, Platform> {
    state
        .lock()
        .unwrap_or_else(|poisoned| poisoned.into_inner())
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    code: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<&'static str>,
}

#[derive(Debug)]
pub struct ApiError(ServiceError);

impl<E: Into<ServiceError>> From<E> for ApiError {
    fn from(e: E) -> Self {
        ApiError(e.into())
    }
}

fn classify(e: &ServiceError) -> (StatusCode, &'static str) {
    use AnnotationError as A;
    match e {
        ServiceError::Annotation(a) => match a {
            A::UnknownRound(_) => (StatusCode::NOT_FOUND, "unknown_round"),
            A::UnknownDataset(_) => (StatusCode::NOT_FOUND, "unknown_dataset"),
            A::UnknownScheme(_) => (StatusCode::NOT_FOUND, "unknown_scheme"),
            A::UnknownPost(_) => (StatusCode::NOT_FOUND, "unknown_post"),
            A::UnknownAssignment(_) => (StatusCode::NOT_FOUND, "unknown_assignment"),
            A::RoundClosed(_) => (StatusCode::CONFLICT, "round_closed"),
            A::OpenAssignmentExists(_) => (StatusCode::CONFLICT, "open_assignment"),
            A::DuplicateSubmission(_) => (StatusCode::CONFLICT, "duplicate_submission"),
            A::DuplicateRound(_) => (StatusCode::CONFLICT, "duplicate_round"),
            A::PendingPosts(_) => (StatusCode::CONFLICT, "pending_posts"),
            A::NotAcknowledged(_) => (StatusCode::FORBIDDEN, "definitions_not_acknowledged"),
            A::WorkerExcluded(_) => (StatusCode::FORBIDDEN, "worker_excluded"),
            A::NotYourAssignment(_) => (StatusCode::FORBIDDEN, "not_your_assignment"),
            A::Expired(_) => (StatusCode::GONE, "reservation_expired"),
            A::InvalidJudgment { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_judgment"),
            A::CoverageMismatch(_) => (StatusCode::UNPROCESSABLE_ENTITY, "coverage_mismatch"),
            A::InvalidConfig(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_config"),
        },
        ServiceError::Demographics(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_demographics"),
        ServiceError::BadRequest(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_body"),
        ServiceError::Unauthorized => (StatusCode::UNAUTHORIZED, "unauthorized"),
        ServiceError::Forbidden(_) => (StatusCode::FORBIDDEN, "forbidden"),
        ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
        ServiceError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
        ServiceError::Locked(_)
        | ServiceError::Io(..)
        | ServiceError::Db(_)
        | ServiceError::Corrupt(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = classify(&self.0);
        let field = match &self.0 {
            ServiceError::Demographics(d) => Some(d.field),
            _ => None,
        };
        let body = ErrorBody {
            error: self.0.to_string(),
            code,
            field,
        };
        (status, Json(body)).into_response()
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError(ServiceError::BadRequest(e.body_text())))
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(str::trim)
}

fn require_admin(p: &Platform, headers: &HeaderMap) -> Result<(), ApiError> {
    if p.is_admin(bearer(headers)) {
        Ok(())
    } else {
        Err(ApiError(ServiceError::Unauthorized))
    }
}

async fn register(
    State(state): State<SharedPlatform>,
    payload: Result<Json<DemographicsForm>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let form = body(payload)?;
    let reg = lock(&state).register(&form)?;
    Ok((StatusCode::CREATED, Json(reg)))
}

async fn acknowledge(
    State(state): State<SharedPlatform>,
    Path(worker_id): Path<String>,
    headers: HeaderMap,
) -> Result<StatusCode, ApiError> {
    lock(&state).acknowledge(&worker_id, bearer(&headers))?;
    Ok(StatusCode::NO_CONTENT)
}

async fn scheme(
    State(state): State<SharedPlatform>,
    Path(version): Path<String>,
) -> Result<Response, ApiError> {
    let p = lock(&state);
    let scheme = p
        .schemes()
        .get(&version)
        .map_err(|_| AnnotationError::UnknownScheme(version.clone()))?;
    Ok(Json(scheme).into_response())
}

async fn list_rounds(State(state): State<SharedPlatform>) -> Json<Vec<RoundProgress>> {
    Json(lock(&state).rounds().map(|r| r.progress()).collect())
}

async fn round(
    State(state): State<SharedPlatform>,
    Path(round_id): Path<String>,
) -> Result<Response, ApiError> {
    let view = lock(&state).view(&round_id)?;
    Ok(Json(view).into_response())
}

async fn batch(
    State(state): State<SharedPlatform>,
    Path(round_id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    match lock(&state).next_batch(&round_id, bearer(&headers))? {
        Some(payload) => Ok(Json(payload).into_response()),
        None => Ok(StatusCode::NO_CONTENT.into_response()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Submission {
    pub assignment_id: AssignmentId,
    pub judgments: Vec<JudgmentInput>,
}

async fn submit(
    State(state): State<SharedPlatform>,
    Path(round_id): Path<String>,
    headers: HeaderMap,
    payload: Result<Json<Submission>, JsonRejection>,
) -> Result<Response, ApiError> {
    let s = body(payload)?;
    let report = lock(&state).submit(&round_id, bearer(&headers), s.assignment_id, s.judgments)?;
    Ok(Json(report).into_response())
}

async fn analysis(
    State(state): State<SharedPlatform>,
    Path(round_id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let pending = {
        let mut p = lock(&state);
        require_admin(&p, &headers)?;
        p.analysis(&round_id)?
    };
    let report = match pending {
        Analysis::Cached(r) => r,
        Analysis::Pending(job) => {
            let key = job.key;
            let report = tokio::task::spawn_blocking(move || job.run())
                .await
                .map_err(|e| ServiceError::Corrupt(format!("analysis task failed: {e}")))?;
            lock(&state).cache_report(key, report)?
        }
    };
    Ok(Json(&*report).into_response())
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    format: Option<String>,
    #[serde(default)]
    variant: ExportVariant,
}

async fn export(
    State(state): State<SharedPlatform>,
    Path(round_id): Path<String>,
    Query(q): Query<ExportQuery>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    if let Some(f) = q.format.as_deref().filter(|f| *f != "csv") {
        return Err(ServiceError::BadRequest(format!("unsupported export format '{f}'")).into());
    }
    let bytes = {
        let p = lock(&state);
        require_admin(&p, &headers)?;
        p.export(&round_id, q.variant)?
    };
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], bytes).into_response())
}

async fn close(
    State(state): State<SharedPlatform>,
    Path(round_id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let mut p = lock(&state);
    require_admin(&p, &headers)?;
    let progress = p.close_round(&round_id)?;
    Ok(Json(progress).into_response())
}

pub fn router(state: SharedPlatform) -> Router {
    Router::new()
        .route("/api/workers", post(register))
        .route(
            "/api/workers/{worker_id}/ack-definitions",
            post(acknowledge),
        )
        .route("/api/schemes/{version}", get(scheme))
        .route("/api/rounds", get(list_rounds))
        .route("/api/rounds/{round_id}", get(round))
        .route("/api/rounds/{round_id}/batch", get(batch))
        .route("/api/rounds/{round_id}/judgments", post(submit))
        .route("/api/rounds/{round_id}/analysis", get(analysis))
        .route("/api/rounds/{round_id}/export", get(export))
        .route("/api/rounds/{round_id}/close", post(close))
        .with_state(state)
}

pub async fn serve(
    listener: TcpListener,
    state: SharedPlatform,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
