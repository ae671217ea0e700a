//! HTTP facade for honeytoken two-factor authentication, plus the
//! honeychecker as a separate HTTP process and a client for it.

pub mod api;
pub mod client;
pub mod config;
pub mod honeychecker_service;
pub mod wire;

use std::future::Future;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use axum::Router;
use honeyotp_core::honeychecker::{AlarmFanout, LogAlarmSink};
use honeyotp_core::{
    AccountService, AccountStore, AlarmSink, Honeychecker, SmsGateway, SystemClock,
};
use tokio::net::TcpListener;

pub use api::{router, ApiError, AppState};
pub use client::HttpHoneychecker;
pub use config::{Config, ConfigError, SmsKind};
pub use honeychecker_service::{honeychecker_router, WebhookAlarmSink};

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

/// Account service wired to the remote honeychecker named in `config`.
pub fn build_service(config: &Config, sms: Arc<dyn SmsGateway>) -> anyhow::Result<AccountService> {
    ensure_parent(&config.server.store)?;
    let store = AccountStore::open(&config.server.store).map_err(anyhow::Error::msg)?;
    let honeychecker = HttpHoneychecker::new(
        &config.honeychecker.url,
        &config.honeychecker.secret,
        Duration::from_millis(config.honeychecker.timeout_ms),
    );
    AccountService::new(
        config.accounts.clone(),
        store,
        Arc::new(honeychecker),
        sms,
        Arc::new(SystemClock),
    )
    .map_err(|e| anyhow::anyhow!("{e}"))
}

pub fn build_honeychecker(config: &Config) -> anyhow::Result<Honeychecker> {
    ensure_parent(&config.honeychecker.store)?;
    let mut sinks: Vec<Arc<dyn AlarmSink>> = vec![Arc::new(LogAlarmSink)];
    if let Some(url) = &config.honeychecker.alarm_webhook {
        sinks.push(Arc::new(WebhookAlarmSink::new(
            url.clone(),
            Duration::from_millis(config.honeychecker.timeout_ms),
        )));
    }
    let slots = u32::try_from(config.accounts.slots).context("slot count")?;
    Honeychecker::open(
        &config.honeychecker.store,
        slots,
        Arc::new(AlarmFanout(sinks)),
        Arc::new(SystemClock),
    )
    .map_err(|e| anyhow::anyhow!("{e}"))
}

pub fn server_state(config: &Config, service: AccountService) -> AppState {
    AppState::new(
        Arc::new(service),
        config.rate_limit.quota(),
        config.server.qr_scale,
    )
}

/// Serves `app` with peer addresses available to the rate limiter.
pub async fn serve_app(
    listener: TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(
        listener,
        app.into_make_service_with_connect_info::<SocketAddr>(),
    )
    .with_graceful_shutdown(shutdown)
    .await
}

/// Serves the public API, pruning idle rate-limiter entries once a minute.
pub async fn serve_api(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let pruner = state.limiter.clone().map(|limiter| {
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(Duration::from_secs(60));
            loop {
                tick.tick().await;
                limiter.retain_recent();
            }
        })
    });
    let result = serve_app(listener, router(state), shutdown).await;
    if let Some(task) = pruner {
        task.abort();
    }
    result
}
