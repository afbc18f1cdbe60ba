//! HTTP routes over [`Service`].

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use easg_core::temporal::CorrespondenceOverride;
use easg_core::FrameSlot;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::ServiceError;
use crate::state::{TaskKind, TaskResponse, VerbNounCorrection};
use crate::store::{AnticipateRequest, SeedBatch, Service, SummarizeRequest};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let msg = self.to_string();
        match self {
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, Json(json!({ "error": msg }))),
            ServiceError::Conflict(_) => (StatusCode::CONFLICT, Json(json!({ "error": msg }))),
            ServiceError::Incomplete { missing } => (
                StatusCode::CONFLICT,
                Json(json!({ "error": msg, "missing": missing })),
            ),
            ServiceError::Invalid(report) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                Json(serde_json::to_value(report).unwrap_or_default()),
            ),
            ServiceError::Unprocessable(_) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                Json(json!({ "error": msg })),
            ),
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, Json(json!({ "error": msg }))),
            ServiceError::LlmUnavailable => (
                StatusCode::SERVICE_UNAVAILABLE,
                Json(json!({ "error": msg })),
            ),
            ServiceError::Upstream {
                attempts,
                retry_after_ms,
                ..
            } => (
                StatusCode::BAD_GATEWAY,
                Json(json!({
                    "error": msg,
                    "attempts": attempts,
                    "retry_after_ms": retry_after_ms,
                })),
            ),
            ServiceError::Io(_) | ServiceError::CorruptLog { .. } => (
                StatusCode::INTERNAL_SERVER_ERROR,
                Json(json!({ "error": msg })),
            ),
        }
        .into_response()
    }
}

type Shared = State<Arc<Service>>;
type ApiResult<T> = Result<Json<T>, ServiceError>;

/// JSON body whose parse errors answer 400, keeping 422 for submissions that
/// parse but break an invariant.
struct Body<T>(T);

impl<S, T> axum::extract::FromRequest<S> for Body<T>
where
    S: Send + Sync,
    T: serde::de::DeserializeOwned,
{
    type Rejection = ServiceError;

    async fn from_request(req: axum::extract::Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(rejection(e)),
        }
    }
}

fn rejection(e: JsonRejection) -> ServiceError {
    ServiceError::BadRequest(e.body_text())
}

/// Runs a blocking command (lock plus fsync) off the async workers.
async fn blocking<T: Send + 'static>(
    svc: Arc<Service>,
    f: impl FnOnce(&Service) -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e.to_string())))?
}

pub fn router(svc: Arc<Service>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/taxonomy", get(taxonomy))
        .route("/seeds", post(create_seeds))
        .route("/tasks/next", get(next_task))
        .route("/tasks/{id}", get(get_task))
        .route("/tasks/{id}/claim", post(claim_task))
        .route("/tasks/{id}/response", post(submit))
        .route("/clips/{id}/verbnoun-correction", post(correction))
        .route("/clips/{id}/merge", post(merge_clip))
        .route("/clips/{id}/overrides", axum::routing::put(set_overrides))
        .route("/clips/{id}/recollect", post(recollect_clip))
        .route("/clips/{id}/graphs", get(graphs))
        .route("/clips/{id}/frames/{slot}", get(frames))
        .route("/export", get(export))
        .route("/llm/anticipate", post(anticipate))
        .route("/llm/summarize", post(summarize))
        .with_state(svc)
}

async fn health(State(svc): Shared) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "last_seq": svc.snapshot().last_seq }))
}

async fn taxonomy(State(svc): Shared) -> Json<easg_core::Taxonomy> {
    Json(svc.taxonomy().clone())
}

async fn create_seeds(State(svc): Shared, Body(batch): Body<SeedBatch>) -> Response {
    match blocking(svc, move |s| s.create_seeds(batch)).await {
        Ok(g) => (StatusCode::CREATED, Json(g)).into_response(),
        Err(e) => e.into_response(),
    }
}

#[derive(Debug, Deserialize)]
struct NextQuery {
    #[serde(default)]
    kind: Option<String>,
    annotator: String,
}

async fn next_task(State(svc): Shared, Query(q): Query<NextQuery>) -> Response {
    let kind = match q
        .kind
        .as_deref()
        .filter(|k| !k.is_empty())
        .map(str::parse::<TaskKind>)
    {
        None => None,
        Some(Ok(k)) => Some(k),
        Some(Err(e)) => return ServiceError::BadRequest(e).into_response(),
    };
    match blocking(svc, move |s| s.claim_next(kind, &q.annotator)).await {
        Ok(Some(t)) => Json(t).into_response(),
        Ok(None) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => e.into_response(),
    }
}

async fn get_task(
    State(svc): Shared,
    Path(id): Path<String>,
) -> ApiResult<crate::state::TaskRecord> {
    svc.task(&id).map(Json)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClaimRequest {
    pub annotator: String,
}

async fn claim_task(
    State(svc): Shared,
    Path(id): Path<String>,
    Body(req): Body<ClaimRequest>,
) -> ApiResult<crate::state::TaskRecord> {
    blocking(svc, move |s| s.claim(&id, &req.annotator))
        .await
        .map(Json)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubmitRequest {
    pub annotator: String,
    pub response: TaskResponse,
}

async fn submit(
    State(svc): Shared,
    Path(id): Path<String>,
    Body(req): Body<SubmitRequest>,
) -> ApiResult<crate::store::SubmitOutcome> {
    blocking(svc, move |s| s.submit(&id, &req.annotator, req.response))
        .await
        .map(Json)
}

async fn correction(
    State(svc): Shared,
    Path(id): Path<String>,
    Body(c): Body<VerbNounCorrection>,
) -> ApiResult<VerbNounCorrection> {
    blocking(svc, move |s| s.record_correction(&id, c))
        .await
        .map(Json)
}

async fn merge_clip(
    State(svc): Shared,
    Path(id): Path<String>,
) -> ApiResult<crate::store::MergeOutcome> {
    blocking(svc, move |s| s.merge_clip(&id)).await.map(Json)
}

async fn set_overrides(
    State(svc): Shared,
    Path(id): Path<String>,
    Body(o): Body<CorrespondenceOverride>,
) -> ApiResult<CorrespondenceOverride> {
    blocking(svc, move |s| s.set_overrides(&id, o))
        .await
        .map(Json)
}

async fn recollect_clip(
    State(svc): Shared,
    Path(id): Path<String>,
) -> ApiResult<crate::store::RecollectOutcome> {
    blocking(svc, move |s| s.recollect_clip(&id))
        .await
        .map(Json)
}

async fn graphs(State(svc): Shared, Path(id): Path<String>) -> ApiResult<crate::store::ClipGraphs> {
    svc.graphs(&id).map(Json)
}

async fn frames(
    State(svc): Shared,
    Path((id, slot)): Path<(String, String)>,
) -> ApiResult<Vec<crate::state::FrameView>> {
    let slot: FrameSlot = slot.parse().map_err(ServiceError::BadRequest)?;
    svc.frames(&id, slot).map(Json)
}

async fn export(State(svc): Shared) -> Json<easg_core::formats::DatasetFile> {
    Json(svc.export())
}

async fn anticipate(
    State(svc): Shared,
    Body(req): Body<AnticipateRequest>,
) -> ApiResult<crate::store::AnticipateResponse> {
    svc.anticipate(req).await.map(Json)
}

async fn summarize(
    State(svc): Shared,
    Body(req): Body<SummarizeRequest>,
) -> ApiResult<crate::store::SummarizeResponse> {
    svc.summarize(req).await.map(Json)
}
