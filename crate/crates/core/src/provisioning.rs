//! `otpauth://` provisioning URIs and QR payloads for every slot of a bundle.
//!
//! URI grammar produced:
//!
//! ```text
//! otpauth://totp/{issuer}:{account} (slot {n})?secret={BASE32}&issuer={issuer}&algorithm={alg}&digits={d}&period={s}
//! ```
//!
//! Label and query values are percent-encoded per RFC 3986. The label keeps
//! sub-delimiters such as `(` and `)` literal; `:` inside the issuer or
//! account is always encoded so the first literal colon splits the label.

use std::borrow::Cow;
use std::fmt::Write as _;
use std::io::Cursor;

use base64::prelude::*;
use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};
use qrcode::{EcLevel, QrCode};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::honeytoken::SweetBundle;
use crate::otp::{Algorithm, SweetSecret, TotpParams};

/// Characters escaped in labels and query values: everything outside the
/// RFC 3986 unreserved set and the harmless sub-delimiters `!$'()*`.
const COMPONENT: &AsciiSet = &CONTROLS
    .add(b' ')
    .add(b'"')
    .add(b'#')
    .add(b'%')
    .add(b'&')
    .add(b'+')
    .add(b',')
    .add(b'/')
    .add(b':')
    .add(b';')
    .add(b'<')
    .add(b'=')
    .add(b'>')
    .add(b'?')
    .add(b'@')
    .add(b'[')
    .add(b'\\')
    .add(b']')
    .add(b'^')
    .add(b'`')
    .add(b'{')
    .add(b'|')
    .add(b'}');

const SCHEME: &str = "otpauth://";

/// Byte capacity of a version 40 symbol at error-correction level M.
pub const QR_MAX_BYTES: usize = 2331;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProvisioningError {
    #[error("invalid provisioning input: {0}")]
    Validation(String),
    #[error("otpauth parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("{len} bytes exceed QR capacity of {max} bytes at level M")]
    Capacity { len: usize, max: usize },
    #[error("QR encoding failed: {0}")]
    Qr(String),
    #[error("image encoding failed: {0}")]
    Image(String),
}

fn parse_err(position: usize, message: impl Into<String>) -> ProvisioningError {
    ProvisioningError::Parse {
        position,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtpKind {
    Totp,
    Hotp { counter: u64 },
}

/// A decoded `otpauth://` URI.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OtpAuthUri {
    pub kind: OtpKind,
    pub issuer: Option<String>,
    pub account: String,
    /// Slot ordinal from a `(slot n)` label suffix, when present.
    pub slot: Option<u32>,
    pub secret: SweetSecret,
    /// `skew` and `t0` are not carried by the URI and come back as defaults.
    pub params: TotpParams,
}

fn validate_name(what: &str, value: &str) -> Result<(), ProvisioningError> {
    if value.trim().is_empty() {
        return Err(ProvisioningError::Validation(format!(
            "{what} must not be empty"
        )));
    }
    if value.trim() != value {
        return Err(ProvisioningError::Validation(format!(
            "{what} must not start or end with whitespace"
        )));
    }
    if value.chars().any(char::is_control) {
        return Err(ProvisioningError::Validation(format!(
            "{what} must not contain control characters"
        )));
    }
    Ok(())
}

fn encode(value: &str) -> Cow<'_, str> {
    utf8_percent_encode(value, COMPONENT).into()
}

fn slot_label(account: &str, slot: Option<u32>) -> String {
    match slot {
        Some(n) => format!("{account} (slot {n})"),
        None => account.to_owned(),
    }
}

impl OtpAuthUri {
    /// Human-readable label as an authenticator app shows it.
    pub fn display_label(&self) -> String {
        let account = slot_label(&self.account, self.slot);
        match &self.issuer {
            Some(issuer) => format!("{issuer}:{account}"),
            None => account,
        }
    }

    pub fn to_uri(&self) -> Result<String, ProvisioningError> {
        validate_name("account", &self.account)?;
        if let Some(issuer) = &self.issuer {
            validate_name("issuer", issuer)?;
        }
        let kind = match self.kind {
            OtpKind::Totp => "totp",
            OtpKind::Hotp { .. } => "hotp",
        };
        let mut uri = format!("{SCHEME}{kind}/");
        if let Some(issuer) = &self.issuer {
            write!(uri, "{}:", encode(issuer)).unwrap();
        }
        write!(
            uri,
            "{}?secret={}",
            encode(&slot_label(&self.account, self.slot)),
            self.secret.to_base32()
        )
        .unwrap();
        if let Some(issuer) = &self.issuer {
            write!(uri, "&issuer={}", encode(issuer)).unwrap();
        }
        write!(
            uri,
            "&algorithm={}&digits={}",
            self.params.algorithm, self.params.digits
        )
        .unwrap();
        match self.kind {
            OtpKind::Totp => write!(uri, "&period={}", self.params.step).unwrap(),
            OtpKind::Hotp { counter } => write!(uri, "&counter={counter}").unwrap(),
        }
        Ok(uri)
    }
}

/// TOTP provisioning URI for one slot of a bundle.
pub fn build_otpauth_uri(
    issuer: &str,
    account: &str,
    secret: &SweetSecret,
    params: &TotpParams,
    slot: u32,
) -> Result<String, ProvisioningError> {
    params
        .validate()
        .map_err(|e| ProvisioningError::Validation(e.to_string()))?;
    OtpAuthUri {
        kind: OtpKind::Totp,
        issuer: Some(issuer.to_owned()),
        account: account.to_owned(),
        slot: Some(slot),
        secret: secret.clone(),
        params: *params,
    }
    .to_uri()
}

fn decode_component(raw: &str, position: usize) -> Result<String, ProvisioningError> {
    percent_decode_str(raw)
        .decode_utf8()
        .map(Cow::into_owned)
        .map_err(|_| parse_err(position, "percent-encoded text is not UTF-8"))
}

fn split_slot_suffix(account: &str) -> (String, Option<u32>) {
    if let Some(rest) = account.strip_suffix(')') {
        if let Some(idx) = rest.rfind(" (slot ") {
            if let Ok(n) = rest[idx + 7..].parse::<u32>() {
                if rest[idx + 7..].bytes().all(|b| b.is_ascii_digit()) {
                    return (rest[..idx].to_owned(), Some(n));
                }
            }
        }
    }
    (account.to_owned(), None)
}

/// Parses an `otpauth://totp/...` or `otpauth://hotp/...` URI. Unknown query
/// parameters (for example `image`) are ignored.
pub fn parse_otpauth_uri(uri: &str) -> Result<OtpAuthUri, ProvisioningError> {
    if uri.len() < SCHEME.len() || !uri[..SCHEME.len()].eq_ignore_ascii_case(SCHEME) {
        return Err(parse_err(0, "expected otpauth:// scheme"));
    }
    let mut pos = SCHEME.len();
    let rest = &uri[pos..];
    let slash = rest
        .find('/')
        .ok_or_else(|| parse_err(pos, "missing type segment"))?;
    let kind_text = &rest[..slash];
    let is_hotp = match kind_text.to_ascii_lowercase().as_str() {
        "totp" => false,
        "hotp" => true,
        _ => return Err(parse_err(pos, format!("unknown otp type {kind_text:?}"))),
    };
    pos += slash + 1;

    let rest = &uri[pos..];
    let (label_raw, query) = match rest.find('?') {
        Some(q) => (&rest[..q], &rest[q + 1..]),
        None => return Err(parse_err(uri.len(), "missing query with secret")),
    };
    let label_pos = pos;
    let query_pos = pos + label_raw.len() + 1;

    let (issuer_label, account_raw, account_pos) = match label_raw.find(':') {
        Some(c) => (
            Some(decode_component(&label_raw[..c], label_pos)?),
            &label_raw[c + 1..],
            label_pos + c + 1,
        ),
        None => (None, label_raw, label_pos),
    };
    let account_full = decode_component(account_raw, account_pos)?;
    let account_full = account_full.trim_start();
    if account_full.is_empty() {
        return Err(parse_err(account_pos, "empty account name"));
    }
    let (account, slot) = split_slot_suffix(account_full);

    let mut secret = None;
    let mut issuer_param = None;
    let mut params = TotpParams::default();
    let mut counter = None;
    let mut offset = query_pos;
    for pair in query.split('&') {
        let pair_pos = offset;
        offset += pair.len() + 1;
        if pair.is_empty() {
            continue;
        }
        let (key, value) = pair.split_once('=').unwrap_or((pair, ""));
        let value_pos = pair_pos + key.len() + 1;
        let value = decode_component(value, value_pos)?;
        match key.to_ascii_lowercase().as_str() {
            "secret" => {
                let slot_id = slot.unwrap_or(1);
                secret = Some(
                    SweetSecret::from_base32(slot_id, &value)
                        .map_err(|e| parse_err(value_pos, e.to_string()))?,
                );
            }
            "issuer" => issuer_param = Some(value),
            "algorithm" => {
                params.algorithm = value
                    .parse::<Algorithm>()
                    .map_err(|e| parse_err(value_pos, e.to_string()))?
            }
            "digits" => {
                params.digits = value
                    .parse()
                    .ok()
                    .filter(|d| (6..=8).contains(d))
                    .ok_or_else(|| parse_err(value_pos, format!("invalid digits {value:?}")))?
            }
            "period" => {
                params.step = value
                    .parse()
                    .ok()
                    .filter(|&s| s > 0)
                    .ok_or_else(|| parse_err(value_pos, format!("invalid period {value:?}")))?
            }
            "counter" => {
                counter = Some(
                    value
                        .parse::<u64>()
                        .map_err(|_| parse_err(value_pos, format!("invalid counter {value:?}")))?,
                )
            }
            _ => {}
        }
    }

    let secret = secret.ok_or_else(|| parse_err(query_pos, "missing secret parameter"))?;
    let kind = if is_hotp {
        OtpKind::Hotp {
            counter: counter.ok_or_else(|| parse_err(query_pos, "hotp URI without counter"))?,
        }
    } else {
        OtpKind::Totp
    };
    Ok(OtpAuthUri {
        kind,
        issuer: issuer_param.or(issuer_label),
        account,
        slot,
        secret,
        params,
    })
}

/// A QR symbol (level M) and the text it encodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QrPayload {
    width: usize,
    modules: Vec<bool>,
    text: String,
}

/// Light border around the symbol, in modules.
const QUIET_ZONE: usize = 4;

impl QrPayload {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Row-major module matrix, `true` for dark.
    pub fn modules(&self) -> &[bool] {
        &self.modules
    }

    pub fn is_dark(&self, x: usize, y: usize) -> bool {
        self.modules[y * self.width + x]
    }

    /// Greyscale PNG with a 4-module quiet zone, `scale` pixels per module.
    pub fn to_png(&self, scale: u32) -> Result<Vec<u8>, ProvisioningError> {
        let scale = scale.max(1);
        let side = (self.width + 2 * QUIET_ZONE) as u32 * scale;
        let img = image::GrayImage::from_fn(side, side, |px, py| {
            let x = (px / scale) as usize;
            let y = (py / scale) as usize;
            let dark = (QUIET_ZONE..QUIET_ZONE + self.width).contains(&x)
                && (QUIET_ZONE..QUIET_ZONE + self.width).contains(&y)
                && self.is_dark(x - QUIET_ZONE, y - QUIET_ZONE);
            image::Luma([if dark { 0 } else { 255 }])
        });
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png)
            .map_err(|e| ProvisioningError::Image(e.to_string()))?;
        Ok(out.into_inner())
    }

    /// SVG with one unit square per dark module, quiet zone included.
    pub fn to_svg(&self) -> String {
        let side = self.width + 2 * QUIET_ZONE;
        let mut path = String::new();
        for y in 0..self.width {
            for x in 0..self.width {
                if self.is_dark(x, y) {
                    write!(path, "M{} {}h1v1h-1z", x + QUIET_ZONE, y + QUIET_ZONE).unwrap();
                }
            }
        }
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"0 0 {side} {side}\" \
             width=\"{px}\" height=\"{px}\" shape-rendering=\"crispEdges\">\n\
             <rect width=\"{side}\" height=\"{side}\" fill=\"#ffffff\"/>\n\
             <path fill=\"#000000\" d=\"{path}\"/>\n\
             </svg>\n",
            px = side * 8,
        )
    }
}

pub fn render_qr(text: &str) -> Result<QrPayload, ProvisioningError> {
    if text.len() > QR_MAX_BYTES {
        return Err(ProvisioningError::Capacity {
            len: text.len(),
            max: QR_MAX_BYTES,
        });
    }
    let code =
        QrCode::with_error_correction_level(text.as_bytes(), EcLevel::M).map_err(|e| match e {
            qrcode::types::QrError::DataTooLong => ProvisioningError::Capacity {
                len: text.len(),
                max: QR_MAX_BYTES,
            },
            other => ProvisioningError::Qr(other.to_string()),
        })?;
    Ok(QrPayload {
        width: code.width(),
        modules: code
            .to_colors()
            .into_iter()
            .map(|c| c == qrcode::Color::Dark)
            .collect(),
        text: text.to_owned(),
    })
}

#[derive(Debug, Clone)]
pub struct ProvisioningEntry {
    pub slot: u32,
    pub label: String,
    pub uri: String,
    pub qr: QrPayload,
}

/// One entry per slot, in slot order.
#[derive(Debug, Clone)]
pub struct ProvisioningBundle {
    pub entries: Vec<ProvisioningEntry>,
}

impl ProvisioningBundle {
    pub fn documents(
        &self,
        png_scale: u32,
    ) -> Result<Vec<ProvisioningDocument>, ProvisioningError> {
        self.entries
            .iter()
            .map(|e| {
                Ok(ProvisioningDocument {
                    slot: e.slot,
                    label: e.label.clone(),
                    uri: e.uri.clone(),
                    qr_png_base64: BASE64_STANDARD.encode(e.qr.to_png(png_scale)?),
                })
            })
            .collect()
    }
}

/// Wire form of a provisioning entry with the QR as base64 PNG.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvisioningDocument {
    pub slot: u32,
    pub label: String,
    pub uri: String,
    pub qr_png_base64: String,
}

pub fn provision_bundle(
    issuer: &str,
    bundle: &SweetBundle,
    params: &TotpParams,
) -> Result<ProvisioningBundle, ProvisioningError> {
    let entries = bundle
        .slots()
        .iter()
        .map(|secret| {
            let uri = build_otpauth_uri(issuer, bundle.username(), secret, params, secret.id())?;
            let qr = render_qr(&uri)?;
            Ok(ProvisioningEntry {
                slot: secret.id(),
                label: format!(
                    "{issuer}:{}",
                    slot_label(bundle.username(), Some(secret.id()))
                ),
                uri,
                qr,
            })
        })
        .collect::<Result<_, ProvisioningError>>()?;
    Ok(ProvisioningBundle { entries })
}
