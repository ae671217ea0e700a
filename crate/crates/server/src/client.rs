//! Blocking HTTP client for a remote honeychecker.

use std::time::Duration;

use honeyotp_core::{HoneycheckerError, IndexOracle};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::wire::*;

pub struct HttpHoneychecker {
    base: String,
    secret: String,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpHoneychecker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpHoneychecker")
            .field("base", &self.base)
            .finish_non_exhaustive()
    }
}

impl HttpHoneychecker {
    pub fn new(base_url: &str, secret: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .max_idle_connections(16)
            .build()
            .into();
        Self {
            base: base_url.trim_end_matches('/').to_string(),
            secret: secret.to_string(),
            agent,
        }
    }

    fn call<B: Serialize, R: DeserializeOwned>(
        &self,
        path: &str,
        body: &B,
    ) -> Result<R, HoneycheckerError> {
        let url = format!("{}{path}", self.base);
        let mut resp = self
            .agent
            .post(&url)
            .header(SECRET_HEADER, &self.secret)
            .send_json(body)
            .map_err(|e| HoneycheckerError::Unavailable(format!("{url}: {e}")))?;
        let status = resp.status().as_u16();
        if status == 200 {
            return resp
                .body_mut()
                .read_json::<R>()
                .map_err(|e| HoneycheckerError::Unavailable(format!("{url}: bad response: {e}")));
        }
        let message = resp
            .body_mut()
            .read_json::<ErrorBody>()
            .map(|b| b.message)
            .unwrap_or_else(|_| format!("status {status}"));
        Err(match status {
            404 => HoneycheckerError::UnknownUser(message),
            422 => HoneycheckerError::Validation(message),
            401 => HoneycheckerError::Unavailable("shared secret rejected".into()),
            _ => HoneycheckerError::Unavailable(format!("{url}: {message}")),
        })
    }
}

impl IndexOracle for HttpHoneychecker {
    fn set_index(&self, username: &str, index: u32) -> Result<(), HoneycheckerError> {
        let _: Ack = self.call(
            "/set",
            &SetIndexRequest {
                username: username.into(),
                index,
            },
        )?;
        Ok(())
    }

    fn check(&self, username: &str, observed_slot: u32) -> Result<bool, HoneycheckerError> {
        let r: CheckResponse = self.call(
            "/check",
            &CheckRequest {
                username: username.into(),
                slot: observed_slot,
            },
        )?;
        Ok(r.matched)
    }

    fn delete_index(&self, username: &str) -> Result<(), HoneycheckerError> {
        let _: Ack = self.call(
            "/delete",
            &DeleteRequest {
                username: username.into(),
            },
        )?;
        Ok(())
    }
}
