use std::time::Duration;

use anyhow::{anyhow, Context};
use honeyotp_server::wire::{ErrorBody, RegisterResponse, UnlockRequest};
use serde_json::json;

use crate::qr::{parse_all, stems, write_qr_files};
use crate::{CmdResult, Failure, RegisterArgs};

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(30)))
        .http_status_as_error(false)
        .build()
        .into()
}

fn post(url: &str, body: serde_json::Value, bearer: Option<&str>) -> anyhow::Result<(u16, String)> {
    let mut req = agent().post(url);
    if let Some(token) = bearer {
        req = req.header("authorization", format!("Bearer {token}"));
    }
    let mut resp = req.send_json(body).with_context(|| format!("POST {url}"))?;
    let status = resp.status().as_u16();
    let text = resp
        .body_mut()
        .read_to_string()
        .context("reading response")?;
    Ok((status, text))
}

fn api_error(status: u16, text: &str) -> anyhow::Error {
    match serde_json::from_str::<ErrorBody>(text) {
        Ok(e) if e.breach == Some(true) => {
            anyhow!("{status} {}: {} (breach detected)", e.code, e.message)
        }
        Ok(e) => anyhow!("{status} {}: {}", e.code, e.message),
        Err(_) => anyhow!("unexpected response {status}: {text}"),
    }
}

fn url(base: &str, path: &str) -> String {
    format!("{}{path}", base.trim_end_matches('/'))
}

pub fn register(a: &RegisterArgs) -> CmdResult {
    let (status, text) = post(
        &url(&a.server.server, "/register"),
        json!({
            "username": a.username,
            "password": a.password,
            "firstname": a.firstname,
            "lastname": a.lastname,
            "phone": a.phone,
            "position": a.position,
        }),
        None,
    )?;
    if status != 201 {
        return Err(api_error(status, &text).into());
    }
    let resp: RegisterResponse =
        serde_json::from_str(&text).context("parsing registration response")?;
    let uris: Vec<String> = resp.provisioning.iter().map(|d| d.uri.clone()).collect();
    if let Some(out) = &a.out {
        let names = stems(&parse_all(&uris)?);
        for path in write_qr_files(&uris, &names, out, a.force)? {
            eprintln!("wrote {}", path.display());
        }
    }
    for uri in uris {
        println!("{uri}");
    }
    Ok(())
}

pub fn unlock(server: &str, username: &str, token: &str) -> CmdResult {
    let (status, text) = post(
        &url(server, "/admin/unlock"),
        serde_json::to_value(UnlockRequest {
            username: username.into(),
        })
        .map_err(|e| Failure::Runtime(e.into()))?,
        Some(token),
    )?;
    if status != 200 {
        return Err(api_error(status, &text).into());
    }
    println!("{username} unlocked");
    Ok(())
}
