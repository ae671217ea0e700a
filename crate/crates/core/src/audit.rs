//! Structured audit trail. Records carry a timestamp, the username and the
//! event kind only: never passwords, secrets, codes or slot positions.

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditKind {
    Registered,
    PasswordRejected,
    PasswordLockout,
    PasswordAccepted,
    SmsDeliveryFailed,
    Authenticated,
    OtpRejected,
    OtpLockout,
    BreachDetected,
    Unlocked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub at: i64,
    pub username: String,
    pub event: AuditKind,
}

pub trait AuditSink: Send + Sync {
    fn record(&self, record: &AuditRecord);
}

/// Emits each record as an `audit` target event on the tracing stream.
#[derive(Debug, Default)]
pub struct TracingAudit;

impl AuditSink for TracingAudit {
    fn record(&self, record: &AuditRecord) {
        tracing::info!(
            target: "audit",
            at = record.at,
            username = %record.username,
            event = ?record.event,
        );
    }
}

#[derive(Debug, Default)]
pub struct MemoryAudit {
    records: Mutex<Vec<AuditRecord>>,
}

impl MemoryAudit {
    pub fn records(&self) -> Vec<AuditRecord> {
        self.records.lock().clone()
    }

    pub fn count(&self, event: AuditKind) -> usize {
        self.records
            .lock()
            .iter()
            .filter(|r| r.event == event)
            .count()
    }
}

impl AuditSink for MemoryAudit {
    fn record(&self, record: &AuditRecord) {
        self.records.lock().push(record.clone());
    }
}
