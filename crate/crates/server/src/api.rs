//! The public HTTP facade.
//!
//! | route            | success | failures            |
//! |------------------|---------|---------------------|
//! | `POST /register` | 201     | 409, 422            |
//! | `POST /login`    | 200     | 401, 423, 429       |
//! | `POST /login/otp`| 200     | 401, 422, 423, 429, 503 |
//! | `POST /admin/unlock` | 200 | 401, 404            |
//! | `GET /health`    | 200     |                     |
//!
//! Every error body is an [`ErrorBody`].

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{ConnectInfo, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use governor::DefaultKeyedRateLimiter;
use honeyotp_core::{AccountError, AccountService, LockReason, OtpOutcome, RegistrationForm};

use crate::wire::*;

pub type IpRateLimiter = DefaultKeyedRateLimiter<IpAddr>;

#[derive(Clone)]
pub struct AppState {
    pub service: Arc<AccountService>,
    pub limiter: Option<Arc<IpRateLimiter>>,
    pub qr_scale: u32,
}

impl AppState {
    pub fn new(
        service: Arc<AccountService>,
        quota: Option<governor::Quota>,
        qr_scale: u32,
    ) -> Self {
        Self {
            service,
            limiter: quota.map(|q| Arc::new(IpRateLimiter::keyed(q))),
            qr_scale,
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
                breach: None,
                attempts_remaining: None,
            },
        }
    }

    fn locked(reason: LockReason) -> Self {
        let mut e = Self::new(
            StatusCode::LOCKED,
            "locked",
            format!("account is locked ({reason})"),
        );
        e.body.breach = Some(reason == LockReason::Breach);
        e
    }

    fn internal() -> Self {
        Self::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "internal",
            "internal error",
        )
    }
}

impl From<AccountError> for ApiError {
    fn from(e: AccountError) -> Self {
        match e {
            AccountError::Conflict(_) => Self::new(StatusCode::CONFLICT, "conflict", e.to_string()),
            AccountError::Validation(m) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", m)
            }
            AccountError::WeakPassword(m) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "weak_password", m)
            }
            AccountError::InvalidCredentials => Self::new(
                StatusCode::UNAUTHORIZED,
                "invalid_credentials",
                e.to_string(),
            ),
            AccountError::Locked(reason) => Self::locked(reason),
            AccountError::Session(_) => {
                Self::new(StatusCode::UNAUTHORIZED, "session", e.to_string())
            }
            AccountError::Authorization => {
                Self::new(StatusCode::UNAUTHORIZED, "unauthorized", e.to_string())
            }
            AccountError::UnknownUser(_) => {
                Self::new(StatusCode::NOT_FOUND, "unknown_user", e.to_string())
            }
            AccountError::Integrity(detail) => {
                tracing::error!(%detail, "second factor could not be verified");
                Self::new(
                    StatusCode::SERVICE_UNAVAILABLE,
                    "integrity",
                    "second factor could not be verified, try again later",
                )
            }
            AccountError::Store(detail) | AccountError::Internal(detail) => {
                tracing::error!(%detail, "request failed");
                Self::internal()
            }
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "bad_request",
            e.body_text(),
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, AccountError> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(result) => result.map_err(ApiError::from),
        Err(e) => {
            tracing::error!(error = %e, "worker task failed");
            Err(ApiError::internal())
        }
    }
}

pub fn router(state: AppState) -> Router {
    let mut login = Router::new()
        .route("/login", post(login))
        .route("/login/otp", post(login_otp));
    if let Some(limiter) = state.limiter.clone() {
        login = login.route_layer(middleware::from_fn_with_state(limiter, rate_limit));
    }
    Router::new()
        .route("/register", post(register))
        .route("/admin/unlock", post(unlock))
        .route("/health", get(health))
        .merge(login)
        .with_state(state)
}

fn client_ip(req: &Request) -> IpAddr {
    req.extensions()
        .get::<ConnectInfo<SocketAddr>>()
        .map(|c| c.0.ip())
        .unwrap_or(IpAddr::V4(Ipv4Addr::UNSPECIFIED))
}

async fn rate_limit(
    State(limiter): State<Arc<IpRateLimiter>>,
    req: Request,
    next: Next,
) -> Response {
    let ip = client_ip(&req);
    if limiter.check_key(&ip).is_err() {
        tracing::warn!(%ip, path = %req.uri().path(), "rate limited");
        return ApiError::new(
            StatusCode::TOO_MANY_REQUESTS,
            "rate_limited",
            "too many requests",
        )
        .into_response();
    }
    next.run(req).await
}

async fn register(
    State(state): State<AppState>,
    form: Result<Json<RegistrationForm>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<RegisterResponse>)> {
    let Json(form) = form?;
    let service = state.service.clone();
    let scale = state.qr_scale;
    let response = blocking(move || {
        let bundle = service.register(&form)?;
        let provisioning = bundle
            .documents(scale)
            .map_err(|e| AccountError::Internal(e.to_string()))?;
        Ok(RegisterResponse {
            username: form.username,
            slots: provisioning.len(),
            provisioning,
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(response)))
}

async fn login(
    State(state): State<AppState>,
    body: Result<Json<LoginRequest>, JsonRejection>,
) -> ApiResult<Json<SessionResponse>> {
    let Json(req) = body?;
    let service = state.service.clone();
    let challenge = blocking(move || service.login_password(&req.username, &req.password)).await?;
    Ok(Json(SessionResponse {
        session_id: challenge.session_id,
        expires_at: challenge.expires_at,
        slots: challenge.slots,
        sms_delivered: challenge.sms_delivered,
    }))
}

async fn login_otp(
    State(state): State<AppState>,
    body: Result<Json<OtpRequest>, JsonRejection>,
) -> ApiResult<Json<TokenResponse>> {
    let Json(req) = body?;
    let service = state.service.clone();
    let outcome = blocking(move || {
        let now = service.clock().now();
        service.login_otp(&req.session_id, &req.code, now)
    })
    .await?;
    match outcome {
        OtpOutcome::Authenticated { token } => Ok(Json(TokenResponse { token })),
        OtpOutcome::Rejected { attempts_remaining } => {
            let mut e = ApiError::new(
                StatusCode::UNAUTHORIZED,
                "invalid_code",
                "code not accepted",
            );
            e.body.attempts_remaining = Some(attempts_remaining);
            Err(e)
        }
        OtpOutcome::Locked { reason } => Err(ApiError::locked(reason)),
    }
}

fn bearer(headers: &HeaderMap) -> String {
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .unwrap_or_default()
        .to_string()
}

async fn unlock(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Result<Json<UnlockRequest>, JsonRejection>,
) -> ApiResult<Json<UnlockResponse>> {
    let Json(req) = body?;
    let token = bearer(&headers);
    let service = state.service.clone();
    let username = req.username.clone();
    blocking(move || service.unlock(&token, &username)).await?;
    Ok(Json(UnlockResponse {
        username: req.username,
        status: "active".into(),
    }))
}

async fn health() -> Json<HealthResponse> {
    Json(HealthResponse {
        status: "ok".into(),
    })
}
