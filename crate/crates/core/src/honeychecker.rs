//! The honeychecker: a small, separately stored service that knows which
//! slot of each user's bundle is genuine and raises an alarm whenever it is
//! asked about any other slot.
//!
//! Its store holds `(username, sweet_index, updated_at)` and nothing else.
//! Persistence is an append-only JSON-lines log replayed on open; every
//! append is synced before the call returns.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HoneycheckerError {
    #[error("invalid request: {0}")]
    Validation(String),
    #[error("no sweet index registered for {0:?}")]
    UnknownUser(String),
    #[error("honeychecker unavailable: {0}")]
    Unavailable(String),
    #[error("honeychecker store error: {0}")]
    Store(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweetIndexRecord {
    pub username: String,
    pub sweet_index: u32,
    pub updated_at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlarmSignal {
    pub username: String,
    pub observed_slot: u32,
    pub raised_at: i64,
}

/// Where alarms go. The honeychecker calls `raise` once per failed check.
pub trait AlarmSink: Send + Sync {
    fn raise(&self, alarm: &AlarmSignal);
}

/// Writes alarms to the tracing stream at warn level.
#[derive(Debug, Default)]
pub struct LogAlarmSink;

impl AlarmSink for LogAlarmSink {
    fn raise(&self, alarm: &AlarmSignal) {
        tracing::warn!(
            target: "honeychecker::alarm",
            username = %alarm.username,
            observed_slot = alarm.observed_slot,
            raised_at = alarm.raised_at,
            "decoy slot submitted"
        );
    }
}

/// Keeps alarms in memory for inspection.
#[derive(Debug, Default)]
pub struct MemoryAlarmSink {
    alarms: Mutex<Vec<AlarmSignal>>,
}

impl MemoryAlarmSink {
    pub fn alarms(&self) -> Vec<AlarmSignal> {
        self.alarms.lock().clone()
    }

    pub fn len(&self) -> usize {
        self.alarms.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.alarms.lock().is_empty()
    }
}

impl AlarmSink for MemoryAlarmSink {
    fn raise(&self, alarm: &AlarmSignal) {
        self.alarms.lock().push(alarm.clone());
    }
}

impl<T: AlarmSink + ?Sized> AlarmSink for Arc<T> {
    fn raise(&self, alarm: &AlarmSignal) {
        (**self).raise(alarm)
    }
}

/// Fans one alarm out to several sinks.
pub struct AlarmFanout(pub Vec<Arc<dyn AlarmSink>>);

impl AlarmSink for AlarmFanout {
    fn raise(&self, alarm: &AlarmSignal) {
        for sink in &self.0 {
            sink.raise(alarm);
        }
    }
}

/// What the account service needs from a honeychecker, whether it runs
/// in-process or behind the wire API.
pub trait IndexOracle: Send + Sync {
    fn set_index(&self, username: &str, index: u32) -> Result<(), HoneycheckerError>;

    /// True iff `observed_slot` is the stored index. A false answer has
    /// already raised an alarm on the honeychecker side.
    fn check(&self, username: &str, observed_slot: u32) -> Result<bool, HoneycheckerError>;

    fn delete_index(&self, username: &str) -> Result<(), HoneycheckerError>;
}

impl<T: IndexOracle + ?Sized> IndexOracle for Arc<T> {
    fn set_index(&self, username: &str, index: u32) -> Result<(), HoneycheckerError> {
        (**self).set_index(username, index)
    }

    fn check(&self, username: &str, observed_slot: u32) -> Result<bool, HoneycheckerError> {
        (**self).check(username, observed_slot)
    }

    fn delete_index(&self, username: &str) -> Result<(), HoneycheckerError> {
        (**self).delete_index(username)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum LogEntry {
    Set(SweetIndexRecord),
    Delete { username: String, at: i64 },
}

#[derive(Debug)]
pub struct CheckResult {
    pub matched: bool,
    pub alarm: Option<AlarmSignal>,
}

pub struct Honeychecker {
    records: RwLock<BTreeMap<String, SweetIndexRecord>>,
    log: Option<Mutex<File>>,
    path: Option<PathBuf>,
    slots: u32,
    sink: Arc<dyn AlarmSink>,
    clock: Arc<dyn Clock>,
}

impl Honeychecker {
    pub fn in_memory(slots: u32, sink: Arc<dyn AlarmSink>, clock: Arc<dyn Clock>) -> Self {
        Self {
            records: RwLock::new(BTreeMap::new()),
            log: None,
            path: None,
            slots,
            sink,
            clock,
        }
    }

    /// Opens (or creates) the log at `path` and replays it. A torn final
    /// line from an interrupted append is ignored.
    pub fn open(
        path: impl AsRef<Path>,
        slots: u32,
        sink: Arc<dyn AlarmSink>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, HoneycheckerError> {
        let path = path.as_ref();
        let store_err =
            |e: std::io::Error| HoneycheckerError::Store(format!("{}: {e}", path.display()));
        let mut records = BTreeMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(store_err)?);
            let lines: Vec<String> = reader
                .lines()
                .collect::<Result<_, _>>()
                .map_err(store_err)?;
            let last = lines.len().saturating_sub(1);
            for (n, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<LogEntry>(line) {
                    Ok(LogEntry::Set(record)) => {
                        records.insert(record.username.clone(), record);
                    }
                    Ok(LogEntry::Delete { username, .. }) => {
                        records.remove(&username);
                    }
                    Err(_) if n == last => {
                        tracing::warn!(path = %path.display(), "ignoring torn final log line");
                    }
                    Err(e) => {
                        return Err(HoneycheckerError::Store(format!(
                            "{} line {}: {e}",
                            path.display(),
                            n + 1
                        )))
                    }
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(store_err)?;
        Ok(Self {
            records: RwLock::new(records),
            log: Some(Mutex::new(file)),
            path: Some(path.to_path_buf()),
            slots,
            sink,
            clock,
        })
    }

    pub fn slots(&self) -> u32 {
        self.slots
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn records(&self) -> Vec<SweetIndexRecord> {
        self.records.read().values().cloned().collect()
    }

    fn append(&self, entry: &LogEntry) -> Result<(), HoneycheckerError> {
        let Some(log) = &self.log else {
            return Ok(());
        };
        let mut line =
            serde_json::to_vec(entry).map_err(|e| HoneycheckerError::Store(e.to_string()))?;
        line.push(b'\n');
        let mut file = log.lock();
        file.write_all(&line)
            .and_then(|_| file.sync_data())
            .map_err(|e| HoneycheckerError::Store(e.to_string()))
    }

    fn validate_username(username: &str) -> Result<(), HoneycheckerError> {
        if username.is_empty() {
            return Err(HoneycheckerError::Validation(
                "username must not be empty".into(),
            ));
        }
        Ok(())
    }

    pub fn set_index(&self, username: &str, index: u32) -> Result<(), HoneycheckerError> {
        Self::validate_username(username)?;
        if index < 1 || index > self.slots {
            return Err(HoneycheckerError::Validation(format!(
                "index {index} outside 1..={}",
                self.slots
            )));
        }
        let record = SweetIndexRecord {
            username: username.to_owned(),
            sweet_index: index,
            updated_at: self.clock.now(),
        };
        let mut records = self.records.write();
        self.append(&LogEntry::Set(record.clone()))?;
        records.insert(record.username.clone(), record);
        Ok(())
    }

    pub fn check_slot(
        &self,
        username: &str,
        observed_slot: u32,
    ) -> Result<CheckResult, HoneycheckerError> {
        let stored = self
            .records
            .read()
            .get(username)
            .map(|r| r.sweet_index)
            .ok_or_else(|| HoneycheckerError::UnknownUser(username.to_owned()))?;
        if stored == observed_slot {
            return Ok(CheckResult {
                matched: true,
                alarm: None,
            });
        }
        let alarm = AlarmSignal {
            username: username.to_owned(),
            observed_slot,
            raised_at: self.clock.now(),
        };
        self.sink.raise(&alarm);
        Ok(CheckResult {
            matched: false,
            alarm: Some(alarm),
        })
    }

    pub fn delete_index(&self, username: &str) -> Result<(), HoneycheckerError> {
        let mut records = self.records.write();
        if records.contains_key(username) {
            self.append(&LogEntry::Delete {
                username: username.to_owned(),
                at: self.clock.now(),
            })?;
            records.remove(username);
        }
        Ok(())
    }
}

impl IndexOracle for Honeychecker {
    fn set_index(&self, username: &str, index: u32) -> Result<(), HoneycheckerError> {
        Honeychecker::set_index(self, username, index)
    }

    fn check(&self, username: &str, observed_slot: u32) -> Result<bool, HoneycheckerError> {
        Honeychecker::check_slot(self, username, observed_slot).map(|r| r.matched)
    }

    fn delete_index(&self, username: &str) -> Result<(), HoneycheckerError> {
        Honeychecker::delete_index(self, username)
    }
}
