//! Append-only audit log with strictly increasing sequence numbers.
//!
//! Events may optionally be mirrored to a JSON-lines file; reopening the
//! file resumes the sequence where it stopped.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Actor {
    pub role: String,
    pub id: String,
}

impl Actor {
    pub fn new(role: impl Into<String>, id: impl Into<String>) -> Self {
        Self { role: role.into(), id: id.into() }
    }

    pub fn system() -> Self {
        Self::new("system", "server")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub seq: u64,
    pub at: DateTime<Utc>,
    pub actor: Actor,
    pub action: String,
    /// Subject of the action (sitting id, reg no, package id, ...).
    #[serde(default)]
    pub subject: String,
    pub outcome: String,
}

#[derive(Debug, Default)]
struct Inner {
    events: Vec<AuditEvent>,
    sink: Option<File>,
}

#[derive(Debug, Default)]
pub struct AuditLog {
    inner: Mutex<Inner>,
}

impl AuditLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: &Path) -> io::Result<Self> {
        let mut events = Vec::new();
        if path.exists() {
            for line in BufReader::new(File::open(path)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let ev: AuditEvent = serde_json::from_str(&line)
                    .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
                events.push(ev);
            }
        }
        let sink = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { inner: Mutex::new(Inner { events, sink: Some(sink) }) })
    }

    pub fn append(
        &self,
        at: DateTime<Utc>,
        actor: Actor,
        action: impl Into<String>,
        subject: impl Into<String>,
        outcome: impl Into<String>,
    ) -> io::Result<u64> {
        let mut inner = self.inner.lock();
        let seq = inner.events.last().map_or(1, |e| e.seq + 1);
        let event = AuditEvent {
            seq,
            at,
            actor,
            action: action.into(),
            subject: subject.into(),
            outcome: outcome.into(),
        };
        if let Some(sink) = inner.sink.as_mut() {
            let mut line = serde_json::to_vec(&event).map_err(io::Error::other)?;
            line.push(b'\n');
            sink.write_all(&line)?;
        }
        inner.events.push(event);
        Ok(seq)
    }

    pub fn events(&self) -> Vec<AuditEvent> {
        self.inner.lock().events.clone()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
