//! HTTP service over a running simulation: the escalation queue, decision
//! endpoints, record lookups and a live audit stream.
//!
//! Every route requires a bearer token (see [`Tokens`]). All mutations go
//! through one writer task, so concurrent decisions on a task have a single
//! winner and every other submitter receives `409 wrong_state`.

mod auth;
mod error;
mod routes;
mod service;

use std::sync::Arc;

use axum::http::header::CONTENT_TYPE;
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Serialize;
use tower_http::cors::CorsLayer;
use ur_core::canonical;

pub use auth::{Human, Tokens, TOKEN_FILE_ENV};
pub use error::ApiError;
pub use routes::DecisionBody;
pub use service::{Feed, Service};

pub const DEFAULT_PORT: u16 = 7340;

pub(crate) fn canonical_response<T: Serialize + ?Sized>(status: StatusCode, value: &T) -> Response {
    let mut res = (status, canonical::to_string(value)).into_response();
    res.headers_mut()
        .insert(CONTENT_TYPE, HeaderValue::from_static("application/json"));
    res
}

pub fn router(service: Service, tokens: Tokens) -> Router {
    Router::new()
        .route("/escalations", get(routes::escalations))
        .route("/escalations/{id}", get(routes::escalation))
        .route("/escalations/{id}/claim", post(routes::claim_task))
        .route("/escalations/{id}/decision", post(routes::decide))
        .route("/records", get(routes::records))
        .route("/records/{id}", get(routes::record))
        .route("/records/{id}/history", get(routes::history))
        .route("/events", get(routes::events))
        .route("/snapshot", get(routes::snapshot))
        .route("/scenario/step", post(routes::step))
        .route("/transition-table", get(routes::transition_table))
        .route_layer(axum::middleware::from_fn_with_state(
            Arc::new(tokens),
            auth::require_token,
        ))
        .layer(CorsLayer::permissive())
        .with_state(service)
}
