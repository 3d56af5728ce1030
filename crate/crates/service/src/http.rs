//! JSON over HTTP.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use threadtrace_core::Direction;

use crate::api::{ApiError, FillInRequest, OrderingRequest, SelectionRequest, Service};

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Locked(_) => StatusCode::CONFLICT,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!(error = %self, "request failed");
        }
        (
            status,
            Json(serde_json::json!({ "error": self.to_string() })),
        )
            .into_response()
    }
}

type Shared = State<Arc<Service>>;

#[derive(Debug, Deserialize)]
struct ViewQuery {
    learner: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ReplayQuery {
    choice: usize,
    cursor: Option<usize>,
    dir: Option<Direction>,
}

async fn list(State(s): Shared) -> impl IntoResponse {
    Json(s.list_exercises())
}

async fn view(
    State(s): Shared,
    Path(id): Path<String>,
    Query(q): Query<ViewQuery>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(s.get_exercise(&id, q.learner.as_deref())?))
}

async fn selection(
    State(s): Shared,
    Json(req): Json<SelectionRequest>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(s.submit_selection(&req)?))
}

async fn fill_in(
    State(s): Shared,
    Json(req): Json<FillInRequest>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(s.submit_fill_in(&req)?))
}

async fn ordering(
    State(s): Shared,
    Json(req): Json<OrderingRequest>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(s.submit_ordering(&req)?))
}

async fn stats(State(s): Shared, Path(name): Path<String>) -> impl IntoResponse {
    Json(s.session_stats(&name))
}

async fn replay(
    State(s): Shared,
    Path(id): Path<String>,
    Query(q): Query<ReplayQuery>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(s.replay(&id, q.choice, q.cursor, q.dir)?))
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/exercises", get(list))
        .route("/exercises/{id}", get(view))
        .route("/exercises/{id}/replay", get(replay))
        .route("/attempts/selection", post(selection))
        .route("/attempts/fillin", post(fill_in))
        .route("/attempts/ordering", post(ordering))
        .route("/learners/{name}/stats", get(stats))
        .with_state(service)
}
