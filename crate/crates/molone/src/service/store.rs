//! Append-only JSON-lines event log shared by all sessions.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use molone_core::engine::{Choice, EngineConfig};
use molone_core::BenchmarkId;
use serde::{Deserialize, Serialize};

use super::payload::Mode;
use crate::error::{HarnessError, IoContext, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Create {
        session_id: String,
        ts_ms: u64,
        benchmark: BenchmarkId,
        seed: u64,
        mode: Mode,
        budget: usize,
        note: Option<String>,
        config: Box<EngineConfig>,
    },
    PairIssued {
        session_id: String,
        ts_ms: u64,
        pair_id: u64,
    },
    Choice {
        session_id: String,
        ts_ms: u64,
        pair_id: u64,
        choice: Choice,
    },
    Batch {
        session_id: String,
        ts_ms: u64,
        stage: usize,
        observations: usize,
    },
}

impl Event {
    pub fn session_id(&self) -> &str {
        match self {
            Event::Create { session_id, .. }
            | Event::PairIssued { session_id, .. }
            | Event::Choice { session_id, .. }
            | Event::Batch { session_id, .. } => session_id,
        }
    }

    pub fn ts_ms(&self) -> u64 {
        match self {
            Event::Create { ts_ms, .. }
            | Event::PairIssued { ts_ms, .. }
            | Event::Choice { ts_ms, .. }
            | Event::Batch { ts_ms, .. } => *ts_ms,
        }
    }
}

/// Cuts a partially written last line so new appends start on a fresh line.
fn drop_torn_tail(path: &Path) -> Result<()> {
    let Ok(bytes) = fs::read(path) else {
        return Ok(());
    };
    if bytes.last().is_some_and(|b| *b != b'\n') {
        let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
        let f = OpenOptions::new().write(true).open(path).at(path)?;
        f.set_len(keep as u64).at(path)?;
        f.sync_all().at(path)?;
    }
    Ok(())
}

#[derive(Debug)]
pub struct EventStore {
    path: PathBuf,
    file: Mutex<File>,
}

pub const LOG_NAME: &str = "events.jsonl";

impl EventStore {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).at(dir)?;
        let path = dir.join(LOG_NAME);
        drop_torn_tail(&path)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .at(&path)?;
        Ok(Self {
            path,
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends events as consecutive lines and syncs before returning.
    pub fn append(&self, events: &[Event]) -> Result<()> {
        let mut buf = Vec::new();
        for e in events {
            serde_json::to_writer(&mut buf, e)?;
            buf.push(b'\n');
        }
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        f.write_all(&buf).at(&self.path)?;
        f.sync_data().at(&self.path)
    }

    /// All complete events in log order. A torn final line (crash during a
    /// write) is dropped; corruption anywhere else is an error.
    pub fn read_all(&self) -> Result<Vec<Event>> {
        let f = File::open(&self.path).at(&self.path)?;
        let lines: Vec<String> = BufReader::new(f)
            .lines()
            .collect::<std::io::Result<_>>()
            .at(&self.path)?;
        let mut events = Vec::with_capacity(lines.len());
        let last = lines.len().saturating_sub(1);
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(line) {
                Ok(e) => events.push(e),
                Err(_) if i == last => break,
                Err(e) => {
                    return Err(HarnessError::Data(format!(
                        "{} line {}: {e}",
                        self.path.display(),
                        i + 1
                    )));
                }
            }
        }
        Ok(events)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let store = EventStore::open(dir.path()).unwrap();
        let e = Event::PairIssued {
            session_id: "s".into(),
            ts_ms: 1,
            pair_id: 1,
        };
        let c = Event::Choice {
            session_id: "s".into(),
            ts_ms: 2,
            pair_id: 1,
            choice: Choice::B,
        };
        store.append(&[e.clone(), c.clone()]).unwrap();
        assert_eq!(store.read_all().unwrap(), vec![e.clone(), c.clone()]);
        std::fs::OpenOptions::new()
            .append(true)
            .open(store.path())
            .unwrap()
            .write_all(b"{\"event\":\"cho")
            .unwrap();
        assert_eq!(store.read_all().unwrap(), vec![e.clone(), c.clone()]);
        drop(store);
        let store = EventStore::open(dir.path()).unwrap();
        store.append(&[e.clone()]).unwrap();
        assert_eq!(store.read_all().unwrap(), vec![e.clone(), c, e]);
    }
}
