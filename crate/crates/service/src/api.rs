use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::json;

use crate::error::{ApiError, ApiResult};
use crate::records::{JobKind, ModelSummary};
use crate::state::{
    AppState, AssessmentInput, BuildSpaceRequest, CreateDataset, CreateSessions, ExplainQuery, PredictRequest,
    TrainRequest,
};
use crate::store::Kind;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    payload.map(|Json(v)| v).map_err(|e| ApiError::bad_request(e.body_text()))
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> ApiResult<T> {
    q.map(|Query(v)| v).map_err(|e| ApiError::bad_request(e.body_text()))
}

fn raw_json(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

fn created<T: Serialize>(value: T) -> Response {
    (StatusCode::CREATED, Json(value)).into_response()
}

/// CPU-bound request work runs off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(format!("request task failed: {e}")))?
}

async fn create_dataset(
    State(s): State<AppState>,
    payload: Result<Json<CreateDataset>, JsonRejection>,
) -> ApiResult<Response> {
    let req = body(payload)?;
    let summary = blocking(move || s.create_dataset(req)).await?;
    Ok(created(summary))
}

async fn list_datasets(State(s): State<AppState>) -> ApiResult<Response> {
    Ok(Json(json!({ "datasets": s.store().list(Kind::Datasets)? })).into_response())
}

async fn get_dataset(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(raw_json(s.dataset_json(&id)?))
}

async fn train(State(s): State<AppState>, payload: Result<Json<TrainRequest>, JsonRejection>) -> ApiResult<Response> {
    let req = body(payload)?;
    // Fail fast on references the job could never resolve.
    if !s.store().exists(Kind::Datasets, &req.dataset_id) {
        return Err(ApiError::not_found(format!("dataset `{}`", req.dataset_id)));
    }
    let kind = if req.grid { JobKind::GridSearch } else { JobKind::Train };
    let job = s.spawn_job(kind, move |st| st.train_model(&req))?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": job }))).into_response())
}

async fn get_model(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let record = blocking(move || s.model(&id)).await?;
    Ok(Json(ModelSummary::from(record.as_ref())).into_response())
}

async fn predict(
    State(s): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<PredictRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let req = body(payload)?;
    Ok(Json(blocking(move || s.predict(&id, &req)).await?).into_response())
}

async fn build_space(
    State(s): State<AppState>,
    payload: Result<Json<BuildSpaceRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let req = body(payload)?;
    if !s.store().exists(Kind::Models, &req.model_id) {
        return Err(ApiError::not_found(format!("model `{}`", req.model_id)));
    }
    let job = s.spawn_job(JobKind::BuildEmbedding, move |st| st.build_space(&req))?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": job }))).into_response())
}

async fn get_space(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let record = blocking(move || s.space(&id)).await?;
    Ok(Json(record.as_ref().clone()).into_response())
}

async fn explain(State(s): State<AppState>, q: Result<Query<ExplainQuery>, QueryRejection>) -> ApiResult<Response> {
    let q = query(q)?;
    Ok(Json(blocking(move || s.explain(&q)).await?).into_response())
}

async fn create_sessions(
    State(s): State<AppState>,
    payload: Result<Json<CreateSessions>, JsonRejection>,
) -> ApiResult<Response> {
    let req = body(payload)?;
    let views = blocking(move || s.create_sessions(&req)).await?;
    Ok(created(json!({ "sessions": views })))
}

async fn get_session(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(s.session_view(&id)?).into_response())
}

async fn record_assessment(
    State(s): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<AssessmentInput>, JsonRejection>,
) -> ApiResult<Response> {
    let input = body(payload)?;
    Ok(created(blocking(move || s.record_assessment(&id, input)).await?))
}

async fn session_report(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(move || s.session_report(&id)).await?).into_response())
}

async fn session_events(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let text = blocking(move || s.session_events(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

async fn get_job(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(s.job(&id)?).into_response())
}

async fn fallback() -> ApiError {
    ApiError::not_found("no such endpoint")
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/datasets", post(create_dataset).get(list_datasets))
        .route("/datasets/{id}", get(get_dataset))
        .route("/models/train", post(train))
        .route("/models/{id}", get(get_model))
        .route("/models/{id}/predict", post(predict))
        .route("/spaces/build", post(build_space))
        .route("/spaces/{id}", get(get_space))
        .route("/explain", get(explain))
        .route("/sessions", post(create_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/cases", get(get_session))
        .route("/sessions/{id}/assessments", post(record_assessment))
        .route("/sessions/{id}/report", get(session_report))
        .route("/sessions/{id}/events", get(session_events))
        .route("/jobs/{id}", get(get_job))
        .fallback(fallback)
        .with_state(state)
}
