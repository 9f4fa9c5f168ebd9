//! Append-only event store. The JSON-lines file is the source of truth; the
//! in-memory state is derived from it and rebuilt by replay on startup.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use poolstat::efficiency::Action;
use poolstat::model::{AssessorId, DocId, RawLabel, TopicId};
use serde::{Deserialize, Serialize};

use crate::ServiceError;

/// Source of server-side timestamps in milliseconds.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> i64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> i64 {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as i64)
            .unwrap_or(0)
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Default, Clone)]
pub struct ManualClock(Arc<AtomicI64>);

impl ManualClock {
    pub fn new(start_ms: i64) -> Self {
        Self(Arc::new(AtomicI64::new(start_ms)))
    }

    pub fn advance(&self, ms: i64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }

    pub fn set(&self, ms: i64) {
        self.0.store(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> i64 {
        self.0.load(Ordering::SeqCst)
    }
}

/// One line of the event file: an activity event plus its sequence number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredEvent {
    pub seq: u64,
    pub ts: i64,
    pub assessor: AssessorId,
    pub topic: TopicId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc: Option<DocId>,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<RawLabel>,
}

/// A judge event seen as a judgment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JudgmentRecord {
    pub seq: u64,
    pub ts: i64,
    pub assessor: AssessorId,
    pub topic: TopicId,
    pub doc: DocId,
    pub label: RawLabel,
}

impl StoredEvent {
    pub fn judgment(&self) -> Option<JudgmentRecord> {
        match (self.action, &self.doc, self.label) {
            (Action::Judge, Some(doc), Some(label)) => Some(JudgmentRecord {
                seq: self.seq,
                ts: self.ts,
                assessor: self.assessor.clone(),
                topic: self.topic.clone(),
                doc: doc.clone(),
                label,
            }),
            _ => None,
        }
    }
}

type LabelKey = (AssessorId, TopicId);

#[derive(Debug)]
pub struct EventStore {
    path: PathBuf,
    file: File,
    lines: Vec<String>,
    events: Vec<StoredEvent>,
    labels: HashMap<LabelKey, BTreeMap<DocId, RawLabel>>,
}

impl EventStore {
    /// Opens (creating if needed) the event file and replays it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| ServiceError::io(&path, e))?;
        }
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(ServiceError::io(&path, e)),
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| ServiceError::io(&path, e))?;
        let mut store = Self {
            path,
            file,
            lines: Vec::new(),
            events: Vec::new(),
            labels: HashMap::new(),
        };
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let event: StoredEvent = serde_json::from_str(line).map_err(|e| ServiceError::Replay {
                line: i + 1,
                message: e.to_string(),
            })?;
            let expected = store.events.len() as u64 + 1;
            if event.seq != expected {
                return Err(ServiceError::Replay {
                    line: i + 1,
                    message: format!("sequence number {} where {expected} was expected", event.seq),
                });
            }
            store.apply(line.to_string(), event);
        }
        log::info!("replayed {} events from {}", store.events.len(), store.path.display());
        Ok(store)
    }

    fn apply(&mut self, line: String, event: StoredEvent) {
        if let Some(j) = event.judgment() {
            self.labels
                .entry((j.assessor, j.topic))
                .or_default()
                .insert(j.doc, j.label);
        }
        self.lines.push(line);
        self.events.push(event);
    }

    /// Appends an event, assigning the next sequence number, and flushes it to disk.
    pub fn append(
        &mut self,
        ts: i64,
        assessor: &str,
        topic: &str,
        doc: Option<&str>,
        action: Action,
        label: Option<RawLabel>,
    ) -> Result<StoredEvent, ServiceError> {
        let event = StoredEvent {
            seq: self.events.len() as u64 + 1,
            ts,
            assessor: assessor.to_string(),
            topic: topic.to_string(),
            doc: doc.map(str::to_string),
            action,
            label,
        };
        let line = serde_json::to_string(&event).expect("events serialise");
        writeln!(self.file, "{line}")
            .and_then(|_| self.file.flush())
            .map_err(|e| ServiceError::io(&self.path, e))?;
        self.apply(line, event.clone());
        Ok(event)
    }

    pub fn events(&self) -> &[StoredEvent] {
        &self.events
    }

    pub fn judgments(&self) -> impl Iterator<Item = JudgmentRecord> + '_ {
        self.events.iter().filter_map(StoredEvent::judgment)
    }

    /// Current labels of one assessor on one topic (latest judgment wins).
    pub fn labels(&self, assessor: &str, topic: &str) -> Option<&BTreeMap<DocId, RawLabel>> {
        self.labels.get(&(assessor.to_string(), topic.to_string()))
    }

    pub fn label(&self, assessor: &str, topic: &str, doc: &str) -> Option<RawLabel> {
        self.labels(assessor, topic).and_then(|m| m.get(doc).copied())
    }

    /// The event file exactly as written.
    pub fn log_text(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }

    pub fn last_seq(&self) -> u64 {
        self.events.len() as u64
    }
}
