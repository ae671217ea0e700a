use std::io::Write;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use honeyotp_core::otp;
use honeyotp_core::provisioning::OtpKind;
use honeyotp_core::OtpAuthUri;

use crate::qr::parse_all;
use crate::{CmdResult, Failure};

/// One row per URI: label, code and seconds left in the step (`-` for
/// counter-based entries), tab separated.
pub fn table(entries: &[OtpAuthUri], unix_time: i64) -> anyhow::Result<String> {
    let mut out = String::new();
    for e in entries {
        let (code, remaining) = match e.kind {
            OtpKind::Totp => (
                otp::totp(&e.secret, unix_time, &e.params)?,
                e.params.seconds_remaining(unix_time).to_string(),
            ),
            OtpKind::Hotp { counter } => {
                (otp::hotp(&e.secret, counter, &e.params), "-".to_string())
            }
        };
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            e.display_label(),
            code.as_str(),
            remaining
        ));
    }
    Ok(out)
}

fn now() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}

pub fn run(uris: &[String], at: Option<i64>, once: bool) -> CmdResult {
    let entries = parse_all(uris)?;
    let mut stdout = std::io::stdout();
    if once {
        let rows = table(&entries, at.unwrap_or_else(now)).map_err(Failure::Runtime)?;
        stdout
            .write_all(rows.as_bytes())
            .context("writing output")?;
        return Ok(());
    }
    let step = entries
        .iter()
        .map(|e| e.params.step)
        .min()
        .unwrap_or(30)
        .max(1);
    loop {
        let t = now();
        let rows = table(&entries, t).map_err(Failure::Runtime)?;
        stdout
            .write_all(rows.as_bytes())
            .context("writing output")?;
        writeln!(stdout).context("writing output")?;
        stdout.flush().context("writing output")?;
        let wait = step - (t.rem_euclid(step as i64) as u64);
        std::thread::sleep(Duration::from_secs(wait));
    }
}
