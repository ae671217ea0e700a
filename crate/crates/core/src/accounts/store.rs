//! Single-file account store: users, pending login sessions and breach
//! events in one versioned JSON document. Every mutation rewrites the file
//! atomically (temp file + rename). Readers share a lock; writers serialize.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use super::{BreachEvent, LoginSession, UserRecord};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoreState {
    pub schema_version: u32,
    pub users: BTreeMap<String, UserRecord>,
    pub sessions: BTreeMap<String, LoginSession>,
    pub breach_events: Vec<BreachEvent>,
}

impl Default for StoreState {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            users: BTreeMap::new(),
            sessions: BTreeMap::new(),
            breach_events: Vec::new(),
        }
    }
}

#[derive(Debug)]
pub struct AccountStore {
    path: Option<PathBuf>,
    state: RwLock<StoreState>,
}

impl AccountStore {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            state: RwLock::new(StoreState::default()),
        }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, String> {
        let path = path.as_ref();
        let state = if path.exists() {
            let text =
                std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let state: StoreState =
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            if state.schema_version != SCHEMA_VERSION {
                return Err(format!(
                    "{}: unsupported schema version {} (expected {SCHEMA_VERSION})",
                    path.display(),
                    state.schema_version
                ));
            }
            state
        } else {
            StoreState::default()
        };
        let store = Self {
            path: Some(path.to_path_buf()),
            state: RwLock::new(state),
        };
        store.persist(&store.state.read())?;
        Ok(store)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn read<R>(&self, f: impl FnOnce(&StoreState) -> R) -> R {
        f(&self.state.read())
    }

    /// Applies `f` and persists. If persisting fails the in-memory state is
    /// rolled back and the error returned.
    pub fn write<R>(&self, f: impl FnOnce(&mut StoreState) -> R) -> Result<R, String> {
        let mut state = self.state.write();
        let backup = self.path.as_ref().map(|_| state.clone());
        let result = f(&mut state);
        if let Err(e) = self.persist(&state) {
            if let Some(backup) = backup {
                *state = backup;
            }
            return Err(e);
        }
        Ok(result)
    }

    fn persist(&self, state: &StoreState) -> Result<(), String> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or_else(|| Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| e.to_string())?;
        serde_json::to_writer_pretty(&mut tmp, state).map_err(|e| e.to_string())?;
        tmp.write_all(b"\n").map_err(|e| e.to_string())?;
        tmp.as_file().sync_all().map_err(|e| e.to_string())?;
        tmp.persist(path).map_err(|e| e.to_string())?;
        Ok(())
    }

    /// The document exactly as persisted.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&*self.state.read()).expect("store state serializes")
    }

    pub fn user(&self, username: &str) -> Option<UserRecord> {
        self.state.read().users.get(username).cloned()
    }

    pub fn breach_events(&self) -> Vec<BreachEvent> {
        self.state.read().breach_events.clone()
    }

    pub fn session_count(&self) -> usize {
        self.state.read().sessions.len()
    }
}
