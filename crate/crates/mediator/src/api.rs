//! HTTP routes. Rationals travel as `"p/q"` strings, pieces as arrays of
//! `[left, right]` pairs.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use envyfree::query::QueryKind;

use crate::store::{CreateRequest, MediatorError, SessionStore};

impl IntoResponse for MediatorError {
    fn into_response(self) -> Response {
        let status = match self {
            MediatorError::BadRoster(_) => StatusCode::BAD_REQUEST,
            MediatorError::Unauthorized => StatusCode::UNAUTHORIZED,
            MediatorError::SessionNotFound(_) => StatusCode::NOT_FOUND,
            MediatorError::MalformedAnswer(_) => StatusCode::UNPROCESSABLE_ENTITY,
            MediatorError::NotPending(_) => StatusCode::CONFLICT,
            MediatorError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.kind(), "message": self.to_string() }))).into_response()
    }
}

type Reply = Result<Json<Value>, MediatorError>;

#[derive(Deserialize)]
struct TokenParam {
    token: Option<String>,
}

#[derive(Deserialize)]
struct AnswerBody {
    token: String,
    #[serde(default)]
    seq: Option<u64>,
    #[serde(default)]
    kind: Option<QueryKind>,
    #[serde(alias = "point", alias = "value")]
    answer: String,
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/pending", get(pending))
        .route("/sessions/{id}/answer", post(answer))
        .route("/sessions/{id}/state", get(state))
        .route("/sessions/{id}/transcript", get(transcript))
        .with_state(store)
}

async fn create(State(store): State<Arc<SessionStore>>, body: String) -> Result<(StatusCode, Json<Value>), MediatorError> {
    let req: CreateRequest = serde_json::from_str(&body).map_err(|e| MediatorError::BadRoster(e.to_string()))?;
    let created = store.create(req)?;
    Ok((StatusCode::CREATED, Json(serde_json::to_value(created).expect("serializable"))))
}

async fn pending(State(store): State<Arc<SessionStore>>, Path(id): Path<String>, Query(q): Query<TokenParam>) -> Reply {
    let token = q.token.ok_or(MediatorError::Unauthorized)?;
    store.pending(&id, &token).map(Json)
}

async fn answer(State(store): State<Arc<SessionStore>>, Path(id): Path<String>, body: String) -> Reply {
    let body: AnswerBody = serde_json::from_str(&body).map_err(|e| MediatorError::MalformedAnswer(e.to_string()))?;
    store.answer(&id, &body.token, body.seq, body.kind, &body.answer).map(Json)
}

async fn state(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> Reply {
    store.state(&id).map(Json)
}

async fn transcript(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> Reply {
    store.transcript(&id).map(Json)
}

/// Serves `store` on `addr` until the process is stopped.
pub async fn serve(store: Arc<SessionStore>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(store)).await
}
