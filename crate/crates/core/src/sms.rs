//! SMS delivery contract. Real carrier integration is out of scope; the
//! gateways here cover tests, demos and file-based inspection.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::otp::OtpCode;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmsError {
    #[error("sms gateway unavailable: {0}")]
    Unavailable(String),
    #[error("sms delivery failed: {0}")]
    Delivery(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmsMessage {
    pub to: String,
    pub body: String,
}

impl SmsMessage {
    /// One line per slot, `"{ordinal}: {code}"`, in slot order.
    pub fn with_codes(to: &str, codes: &[OtpCode]) -> Self {
        let body = codes
            .iter()
            .enumerate()
            .map(|(i, code)| format!("{}: {}", i + 1, code))
            .collect::<Vec<_>>()
            .join("\n");
        Self {
            to: to.to_owned(),
            body,
        }
    }

    /// Reads the codes back out of a body written by [`SmsMessage::with_codes`].
    pub fn codes(&self) -> Vec<String> {
        self.body
            .lines()
            .filter_map(|line| {
                line.split_once(": ")
                    .map(|(_, code)| code.trim().to_owned())
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryAck {
    pub gateway: &'static str,
}

pub trait SmsGateway: Send + Sync {
    fn name(&self) -> &'static str;
    fn deliver(&self, message: &SmsMessage) -> Result<(), SmsError>;
}

/// Invokes the gateway once and reports the outcome.
pub fn send_sms(gateway: &dyn SmsGateway, message: &SmsMessage) -> Result<DeliveryAck, SmsError> {
    gateway.deliver(message)?;
    Ok(DeliveryAck {
        gateway: gateway.name(),
    })
}

/// Appends to an in-memory outbox.
#[derive(Debug, Default)]
pub struct MockSmsGateway {
    outbox: Mutex<Vec<SmsMessage>>,
}

impl MockSmsGateway {
    pub fn outbox(&self) -> Vec<SmsMessage> {
        self.outbox.lock().clone()
    }

    pub fn last(&self) -> Option<SmsMessage> {
        self.outbox.lock().last().cloned()
    }

    pub fn len(&self) -> usize {
        self.outbox.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.outbox.lock().is_empty()
    }
}

impl SmsGateway for MockSmsGateway {
    fn name(&self) -> &'static str {
        "mock"
    }

    fn deliver(&self, message: &SmsMessage) -> Result<(), SmsError> {
        self.outbox.lock().push(message.clone());
        Ok(())
    }
}

/// Appends each message as a JSON line to a file.
#[derive(Debug)]
pub struct FileSmsGateway {
    path: PathBuf,
    lock: Mutex<()>,
}

impl FileSmsGateway {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            lock: Mutex::new(()),
        }
    }
}

impl SmsGateway for FileSmsGateway {
    fn name(&self) -> &'static str {
        "file"
    }

    fn deliver(&self, message: &SmsMessage) -> Result<(), SmsError> {
        let _guard = self.lock.lock();
        let mut line =
            serde_json::to_vec(message).map_err(|e| SmsError::Delivery(e.to_string()))?;
        line.push(b'\n');
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .and_then(|mut f| f.write_all(&line))
            .map_err(|e| SmsError::Unavailable(format!("{}: {e}", self.path.display())))
    }
}

/// Always fails; stands in for a carrier outage.
#[derive(Debug, Default)]
pub struct FailingSmsGateway;

impl SmsGateway for FailingSmsGateway {
    fn name(&self) -> &'static str {
        "failing"
    }

    fn deliver(&self, _message: &SmsMessage) -> Result<(), SmsError> {
        Err(SmsError::Unavailable("gateway down".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn codes(list: &[&str]) -> Vec<OtpCode> {
        list.iter().map(|c| OtpCode::parse(c).unwrap()).collect()
    }

    #[test]
    fn body_lists_codes_in_slot_order() {
        // Fixture bundle codes at the fixture time.
        let msg = SmsMessage::with_codes("+306912345678", &codes(&["880520", "616869", "921300"]));
        assert_eq!(msg.body, "1: 880520\n2: 616869\n3: 921300");
        assert_eq!(msg.codes(), ["880520", "616869", "921300"]);
    }

    #[test]
    fn mock_outbox_grows_by_one_per_send() {
        let gw = MockSmsGateway::default();
        let msg = SmsMessage::with_codes("+1555000111", &codes(&["000001", "000002"]));
        assert_eq!(send_sms(&gw, &msg).unwrap().gateway, "mock");
        assert_eq!(gw.len(), 1);
        assert_eq!(gw.last().unwrap(), msg);
    }

    #[test]
    fn failing_gateway_reports_error() {
        let msg = SmsMessage::with_codes("+1555000111", &codes(&["000001", "000002"]));
        assert!(send_sms(&FailingSmsGateway, &msg).is_err());
    }

    #[test]
    fn file_gateway_appends_json_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("outbox.jsonl");
        let gw = FileSmsGateway::new(&path);
        let msg = SmsMessage::with_codes("+1555000111", &codes(&["123456", "654321"]));
        gw.deliver(&msg).unwrap();
        gw.deliver(&msg).unwrap();
        let lines: Vec<SmsMessage> = std::fs::read_to_string(&path)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines, vec![msg.clone(), msg]);
    }
}
