//! The honeychecker as an HTTP process: `POST /set`, `POST /check`,
//! `POST /delete`, each guarded by the shared-secret header.

use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Request, State};
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use honeyotp_core::{AlarmSignal, AlarmSink, Honeychecker, HoneycheckerError};
use subtle::ConstantTimeEq;

use crate::wire::*;

#[derive(Clone)]
struct HcState {
    checker: Arc<Honeychecker>,
}

struct HcError(StatusCode, ErrorBody);

impl HcError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self(
            status,
            ErrorBody {
                code: code.into(),
                message: message.into(),
                breach: None,
                attempts_remaining: None,
            },
        )
    }
}

impl From<HoneycheckerError> for HcError {
    fn from(e: HoneycheckerError) -> Self {
        match &e {
            HoneycheckerError::Validation(_) => Self::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "validation",
                e.to_string(),
            ),
            HoneycheckerError::UnknownUser(_) => {
                Self::new(StatusCode::NOT_FOUND, "unknown_user", e.to_string())
            }
            HoneycheckerError::Unavailable(_) | HoneycheckerError::Store(_) => {
                tracing::error!(error = %e, "honeychecker request failed");
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "store", "store error")
            }
        }
    }
}

impl From<JsonRejection> for HcError {
    fn from(e: JsonRejection) -> Self {
        Self::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "bad_request",
            e.body_text(),
        )
    }
}

impl IntoResponse for HcError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

async fn run<T, F>(f: F) -> Result<T, HcError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, HoneycheckerError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|_| HcError::new(StatusCode::INTERNAL_SERVER_ERROR, "store", "store error"))?
        .map_err(HcError::from)
}

pub fn honeychecker_router(checker: Arc<Honeychecker>, secret: &str) -> Router {
    let secret: Arc<[u8]> = secret.as_bytes().into();
    Router::new()
        .route("/set", post(set))
        .route("/check", post(check))
        .route("/delete", post(delete))
        .route_layer(middleware::from_fn_with_state(secret, require_secret))
        .with_state(HcState { checker })
}

async fn require_secret(State(secret): State<Arc<[u8]>>, req: Request, next: Next) -> Response {
    let presented = req
        .headers()
        .get(SECRET_HEADER)
        .map(|v| v.as_bytes())
        .unwrap_or_default();
    let ok = !secret.is_empty() && bool::from(presented.ct_eq(&secret));
    if !ok {
        return HcError::new(
            StatusCode::UNAUTHORIZED,
            "unauthorized",
            "missing or wrong shared secret",
        )
        .into_response();
    }
    next.run(req).await
}

async fn set(
    State(st): State<HcState>,
    body: Result<Json<SetIndexRequest>, JsonRejection>,
) -> Result<Json<Ack>, HcError> {
    let Json(req) = body?;
    run(move || st.checker.set_index(&req.username, req.index)).await?;
    Ok(Json(Ack { ok: true }))
}

async fn check(
    State(st): State<HcState>,
    body: Result<Json<CheckRequest>, JsonRejection>,
) -> Result<Json<CheckResponse>, HcError> {
    let Json(req) = body?;
    let result = run(move || st.checker.check_slot(&req.username, req.slot)).await?;
    Ok(Json(CheckResponse {
        matched: result.matched,
    }))
}

async fn delete(
    State(st): State<HcState>,
    body: Result<Json<DeleteRequest>, JsonRejection>,
) -> Result<Json<Ack>, HcError> {
    let Json(req) = body?;
    run(move || st.checker.delete_index(&req.username)).await?;
    Ok(Json(Ack { ok: true }))
}

/// Posts each alarm as JSON to a URL. Delivery failures are logged.
pub struct WebhookAlarmSink {
    url: String,
    agent: ureq::Agent,
}

impl WebhookAlarmSink {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            url: url.into(),
            agent,
        }
    }
}

impl AlarmSink for WebhookAlarmSink {
    fn raise(&self, alarm: &AlarmSignal) {
        if let Err(e) = self.agent.post(&self.url).send_json(alarm) {
            tracing::error!(url = %self.url, error = %e, "alarm webhook failed");
        }
    }
}
