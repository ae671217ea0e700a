use std::io::Write;
use std::path::Path;

use anyhow::Context;
use honeyotp_server::{Config, ConfigError};
use tokio::net::TcpListener;

use crate::{CmdResult, Failure};

fn load(path: Option<&Path>) -> Result<Config, Failure> {
    Config::load(path).map_err(|e| Failure::Usage(e.to_string()))
}

fn config_failure(e: ConfigError) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting runtime")
        .map_err(Failure::Runtime)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutting down");
}

async fn bind(addr: std::net::SocketAddr) -> anyhow::Result<TcpListener> {
    let listener = TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    let local = listener.local_addr()?;
    println!("listening on {local}");
    std::io::stdout().flush()?;
    Ok(listener)
}

pub fn serve(path: Option<&Path>) -> CmdResult {
    let config = load(path)?;
    config.validate_server().map_err(config_failure)?;
    let sms = config.sms.gateway();
    let service = honeyotp_server::build_service(&config, sms)?;
    let state = honeyotp_server::server_state(&config, service);
    runtime()?.block_on(async {
        let listener = bind(config.server.listen).await?;
        tracing::info!(
            addr = %listener.local_addr()?,
            honeychecker = %config.honeychecker.url,
            sms = ?config.sms.gateway,
            "server started"
        );
        honeyotp_server::serve_api(listener, state, shutdown_signal()).await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(())
}

pub fn honeychecker(path: Option<&Path>) -> CmdResult {
    let config = load(path)?;
    config.validate_honeychecker().map_err(config_failure)?;
    let checker = std::sync::Arc::new(honeyotp_server::build_honeychecker(&config)?);
    let app = honeyotp_server::honeychecker_router(checker, &config.honeychecker.secret);
    runtime()?.block_on(async {
        let listener = bind(config.honeychecker.listen).await?;
        tracing::info!(addr = %listener.local_addr()?, store = %config.honeychecker.store.display(), "honeychecker started");
        honeyotp_server::serve_app(listener, app, shutdown_signal()).await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(())
}
