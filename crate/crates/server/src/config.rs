//! Server and honeychecker configuration: one TOML file plus `HONEYOTP_*`
//! environment overrides.

use std::net::SocketAddr;
use std::num::NonZeroU32;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use honeyotp_core::sms::{FailingSmsGateway, FileSmsGateway, MockSmsGateway};
use honeyotp_core::{AccountsConfig, SmsGateway};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("environment variable {var}: {message}")]
    Env { var: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub server: ServerSection,
    pub honeychecker: HoneycheckerSection,
    pub sms: SmsSection,
    pub rate_limit: RateLimitSection,
    pub accounts: AccountsConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSection {
    pub listen: SocketAddr,
    pub store: PathBuf,
    /// Pixels per QR module in the PNGs returned by `/register`.
    pub qr_scale: u32,
}

impl Default for ServerSection {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            store: PathBuf::from("data/accounts.json"),
            qr_scale: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoneycheckerSection {
    /// Where the server reaches the honeychecker.
    pub url: String,
    pub secret: String,
    /// Where the honeychecker process listens.
    pub listen: SocketAddr,
    pub store: PathBuf,
    pub timeout_ms: u64,
    pub alarm_webhook: Option<String>,
}

impl Default for HoneycheckerSection {
    fn default() -> Self {
        Self {
            url: "http://127.0.0.1:8091".into(),
            secret: String::new(),
            listen: SocketAddr::from(([127, 0, 0, 1], 8091)),
            store: PathBuf::from("data/honeychecker.jsonl"),
            timeout_ms: 2000,
            alarm_webhook: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmsKind {
    #[default]
    Mock,
    File,
    Failing,
}

impl FromStr for SmsKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mock" => Ok(Self::Mock),
            "file" => Ok(Self::File),
            "failing" => Ok(Self::Failing),
            other => Err(format!(
                "unknown sms gateway {other:?} (expected mock, file or failing)"
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmsSection {
    pub gateway: SmsKind,
    /// Used by the file gateway.
    pub outbox: PathBuf,
}

impl Default for SmsSection {
    fn default() -> Self {
        Self {
            gateway: SmsKind::Mock,
            outbox: PathBuf::from("data/sms-outbox.jsonl"),
        }
    }
}

impl SmsSection {
    pub fn gateway(&self) -> Arc<dyn SmsGateway> {
        match self.gateway {
            SmsKind::Mock => Arc::new(MockSmsGateway::default()),
            SmsKind::File => Arc::new(FileSmsGateway::new(&self.outbox)),
            SmsKind::Failing => Arc::new(FailingSmsGateway),
        }
    }
}

/// Per-IP limit on the login endpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateLimitSection {
    pub enabled: bool,
    pub per_second: u32,
    pub burst: u32,
}

impl Default for RateLimitSection {
    fn default() -> Self {
        Self {
            enabled: true,
            per_second: 5,
            burst: 5,
        }
    }
}

impl RateLimitSection {
    pub fn quota(&self) -> Option<governor::Quota> {
        if !self.enabled {
            return None;
        }
        let rate = NonZeroU32::new(self.per_second)?;
        let burst = NonZeroU32::new(self.burst)?;
        Some(governor::Quota::per_second(rate).allow_burst(burst))
    }
}

impl Config {
    /// Reads `path` (when given), then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        config.apply_env(|k| std::env::var(k).ok())?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn apply_env(
        &mut self,
        lookup: impl Fn(&str) -> Option<String>,
    ) -> Result<(), ConfigError> {
        fn parse<T: FromStr>(var: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e: T::Err| ConfigError::Env {
                var: var.into(),
                message: e.to_string(),
            })
        }

        let get = |name: &str| lookup(name).map(|v| (name.to_string(), v));
        if let Some((k, v)) = get("HONEYOTP_LISTEN") {
            self.server.listen = parse(&k, &v)?;
        }
        if let Some((_, v)) = get("HONEYOTP_STORE") {
            self.server.store = v.into();
        }
        if let Some((_, v)) = get("HONEYOTP_HONEYCHECKER_URL") {
            self.honeychecker.url = v;
        }
        if let Some((_, v)) = get("HONEYOTP_HONEYCHECKER_SECRET") {
            self.honeychecker.secret = v;
        }
        if let Some((k, v)) = get("HONEYOTP_HONEYCHECKER_LISTEN") {
            self.honeychecker.listen = parse(&k, &v)?;
        }
        if let Some((_, v)) = get("HONEYOTP_HONEYCHECKER_STORE") {
            self.honeychecker.store = v.into();
        }
        if let Some((_, v)) = get("HONEYOTP_ALARM_WEBHOOK") {
            self.honeychecker.alarm_webhook = Some(v).filter(|v| !v.is_empty());
        }
        if let Some((k, v)) = get("HONEYOTP_SMS") {
            self.sms.gateway = parse(&k, &v)?;
        }
        if let Some((_, v)) = get("HONEYOTP_SMS_OUTBOX") {
            self.sms.outbox = v.into();
        }
        if let Some((k, v)) = get("HONEYOTP_SLOTS") {
            self.accounts.slots = parse(&k, &v)?;
        }
        if let Some((k, v)) = get("HONEYOTP_TOTP_STEP") {
            self.accounts.totp.step = parse(&k, &v)?;
        }
        if let Some((k, v)) = get("HONEYOTP_TOTP_DIGITS") {
            self.accounts.totp.digits = parse(&k, &v)?;
        }
        if let Some((k, v)) = get("HONEYOTP_TOTP_SKEW") {
            self.accounts.totp.skew = parse(&k, &v)?;
        }
        if let Some((k, v)) = get("HONEYOTP_RATE_LIMIT") {
            self.rate_limit.per_second = parse(&k, &v)?;
            self.rate_limit.enabled = self.rate_limit.per_second > 0;
        }
        if let Some((_, v)) = get("HONEYOTP_ADMIN_TOKEN") {
            self.accounts.admin_token = v;
        }
        Ok(())
    }

    /// Checks everything `serve` needs.
    pub fn validate_server(&self) -> Result<(), ConfigError> {
        self.accounts.validate().map_err(ConfigError::Invalid)?;
        self.validate_shared()?;
        if self.server.qr_scale == 0 || self.server.qr_scale > 32 {
            return Err(ConfigError::Invalid(
                "server.qr_scale must be within 1..=32".into(),
            ));
        }
        if self.rate_limit.enabled && self.rate_limit.quota().is_none() {
            return Err(ConfigError::Invalid(
                "rate_limit.per_second and burst must be positive".into(),
            ));
        }
        if !self.honeychecker.url.starts_with("http://")
            && !self.honeychecker.url.starts_with("https://")
        {
            return Err(ConfigError::Invalid(format!(
                "honeychecker.url {:?} must be an http(s) URL",
                self.honeychecker.url
            )));
        }
        Ok(())
    }

    /// Checks everything the honeychecker process needs.
    pub fn validate_honeychecker(&self) -> Result<(), ConfigError> {
        self.validate_shared()?;
        if self.accounts.slots < 2 || self.accounts.slots > u32::MAX as usize {
            return Err(ConfigError::Invalid(format!(
                "slots must be at least 2, got {}",
                self.accounts.slots
            )));
        }
        Ok(())
    }

    fn validate_shared(&self) -> Result<(), ConfigError> {
        if self.honeychecker.secret.is_empty() {
            return Err(ConfigError::Invalid(
                "honeychecker.secret must be set".into(),
            ));
        }
        if self.server.store == self.honeychecker.store {
            return Err(ConfigError::Invalid(
                "the account store and the honeychecker store must be different files".into(),
            ));
        }
        Ok(())
    }
}
