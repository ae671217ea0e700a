#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use honeyotp_core::accounts::HashParams;
use honeyotp_core::honeychecker::MemoryAlarmSink;
use honeyotp_core::sms::MockSmsGateway;
use honeyotp_core::{
    AccountService, AccountStore, AccountsConfig, Honeychecker, IndexOracle, ManualClock,
};
use honeyotp_server::AppState;
use serde_json::{json, Value};
use tower::ServiceExt;

pub const T0: i64 = 1_700_000_000;
pub const PASSWORD: &str = "violet-harbor-42";
pub const ADMIN: &str = "admin-token";

pub struct Harness {
    pub app: Router,
    pub clock: Arc<ManualClock>,
    pub honeychecker: Arc<Honeychecker>,
    pub alarms: Arc<MemoryAlarmSink>,
    pub sms: Arc<MockSmsGateway>,
    pub service: Arc<AccountService>,
}

pub fn accounts_config() -> AccountsConfig {
    AccountsConfig {
        hash: HashParams::insecure_fast(),
        admin_token: ADMIN.into(),
        ..AccountsConfig::default()
    }
}

pub fn harness_with(
    quota: Option<governor::Quota>,
    oracle: Option<Arc<dyn IndexOracle>>,
) -> Harness {
    let clock = Arc::new(ManualClock::new(T0));
    let alarms = Arc::new(MemoryAlarmSink::default());
    let honeychecker = Arc::new(Honeychecker::in_memory(3, alarms.clone(), clock.clone()));
    let sms = Arc::new(MockSmsGateway::default());
    let service = Arc::new(
        AccountService::new(
            accounts_config(),
            AccountStore::in_memory(),
            oracle.unwrap_or_else(|| honeychecker.clone()),
            sms.clone(),
            clock.clone(),
        )
        .unwrap(),
    );
    let app = honeyotp_server::router(AppState {
        service: service.clone(),
        limiter: quota.map(|q| Arc::new(honeyotp_server::api::IpRateLimiter::keyed(q))),
        qr_scale: 2,
    });
    Harness {
        app,
        clock,
        honeychecker,
        alarms,
        sms,
        service,
    }
}

pub fn harness() -> Harness {
    harness_with(None, None)
}

pub fn form(username: &str, position: u32) -> Value {
    json!({
        "username": username,
        "password": PASSWORD,
        "firstname": "Alice",
        "lastname": "A",
        "phone": "+306912345678",
        "position": position,
    })
}

pub async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Value, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX)
        .await
        .unwrap()
        .to_vec();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value, bytes)
}

pub fn post(path: &str, body: &Value) -> Request<Body> {
    Request::post(path)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

pub async fn post_json(app: &Router, path: &str, body: Value) -> (StatusCode, Value) {
    let (s, v, _) = send(app, post(path, &body)).await;
    (s, v)
}

pub fn keys(v: &Value) -> BTreeSet<String> {
    v.as_object().expect("object").keys().cloned().collect()
}

pub fn key_set(list: &[&str]) -> BTreeSet<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// Asserts an error body has exactly the documented fields.
pub fn assert_error_schema(v: &Value, code: &str) {
    let k = keys(v);
    assert!(k.contains("code") && k.contains("message"), "{v}");
    assert!(
        k.is_subset(&key_set(&[
            "code",
            "message",
            "breach",
            "attempts_remaining"
        ])),
        "{v}"
    );
    assert_eq!(v["code"], code, "{v}");
}
