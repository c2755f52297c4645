use std::collections::{HashMap, VecDeque};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::config::ServiceConfig;
use crate::backend::Backend;
use crate::error::Result;
use crate::feedback::event::{EditApplied, EventKind, HighlightShown};
use crate::feedback::{EventLog, InteractionEvent, LogHeader};
use crate::highlight::HighlightReport;
use crate::predictive::Session;

/// Reports kept for edit requests, most recent last.
const RECENT_REPORTS: usize = 32;

/// A session log as returned by the log endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogView {
    pub header: LogHeader,
    pub events: Vec<InteractionEvent>,
}

impl LogView {
    pub fn of(log: &EventLog) -> Self {
        Self {
            header: log.header().clone(),
            events: log.events().to_vec(),
        }
    }
}

pub(crate) struct SessionSlot {
    pub session: Mutex<Session>,
    last_used: Mutex<Instant>,
}

impl SessionSlot {
    pub fn touch(&self) {
        *self.last_used.lock().unwrap() = Instant::now();
    }
}

struct Highlights {
    log: Option<EventLog>,
    recent: VecDeque<HighlightReport>,
}

struct Inner {
    config: ServiceConfig,
    backend: OnceLock<Arc<dyn Backend>>,
    sessions: Mutex<HashMap<String, Arc<SessionSlot>>>,
    /// Logs of expired sessions that were never written to disk.
    retired: Mutex<HashMap<String, LogView>>,
    highlights: Mutex<Highlights>,
}

/// Shared service state. The backend is installed once, possibly after the
/// listener is already accepting requests.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    /// State whose backend has not loaded yet.
    pub fn new(config: ServiceConfig) -> Self {
        let inner = Inner {
            backend: OnceLock::new(),
            sessions: Mutex::new(HashMap::new()),
            retired: Mutex::new(HashMap::new()),
            highlights: Mutex::new(Highlights {
                log: None,
                recent: VecDeque::new(),
            }),
            config,
        };
        Self { inner: Arc::new(inner) }
    }

    pub fn with_backend(config: ServiceConfig, backend: Arc<dyn Backend>) -> Self {
        let state = Self::new(config);
        state.set_backend(backend);
        state
    }

    /// Installs the backend. Later calls are ignored.
    pub fn set_backend(&self, backend: Arc<dyn Backend>) {
        if self.inner.backend.get().is_some() {
            return;
        }
        if let Some(dir) = &self.inner.config.log_dir {
            let id = format!("highlights-{}", uuid::Uuid::new_v4());
            let path = dir.join(format!("{id}.jsonl"));
            let log = EventLog::to_file(path, id, backend.model_id(), self.inner.config.durable_logs);
            self.inner.highlights.lock().unwrap().log = Some(log);
        }
        let _ = self.inner.backend.set(backend);
    }

    pub fn backend(&self) -> Option<Arc<dyn Backend>> {
        self.inner.backend.get().cloned()
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.lock().unwrap().len()
    }

    pub(crate) fn log_path(&self, session_id: &str) -> Option<PathBuf> {
        self.inner
            .config
            .log_dir
            .as_ref()
            .map(|dir| dir.join(format!("{session_id}.jsonl")))
    }

    pub(crate) fn new_log(&self, session_id: &str, model_id: &str) -> EventLog {
        match self.log_path(session_id) {
            Some(path) => EventLog::to_file(path, session_id, model_id, self.inner.config.durable_logs),
            None => EventLog::in_memory(session_id, model_id),
        }
    }

    pub(crate) fn insert(&self, session: Session) {
        let id = session.id().to_string();
        let slot = SessionSlot {
            session: Mutex::new(session),
            last_used: Mutex::new(Instant::now()),
        };
        self.inner.sessions.lock().unwrap().insert(id, Arc::new(slot));
    }

    pub(crate) fn slot(&self, session_id: &str) -> Option<Arc<SessionSlot>> {
        self.inner.sessions.lock().unwrap().get(session_id).cloned()
    }

    pub(crate) fn retired_log(&self, session_id: &str) -> Option<LogView> {
        self.inner.retired.lock().unwrap().get(session_id).cloned()
    }

    /// Drops sessions idle for at least the configured TTL as of `now`,
    /// releasing their cache handles. Their logs stay readable. Returns the
    /// number of sessions expired.
    pub fn expire_idle(&self, now: Instant) -> usize {
        let ttl = Duration::from_secs(self.inner.config.session_ttl_seconds);
        let mut sessions = self.inner.sessions.lock().unwrap();
        let expired: Vec<String> = sessions
            .iter()
            .filter(|(_, slot)| now.saturating_duration_since(*slot.last_used.lock().unwrap()) >= ttl)
            .map(|(id, _)| id.clone())
            .collect();
        for id in &expired {
            let Some(slot) = sessions.remove(id) else { continue };
            let session = slot.session.lock().unwrap();
            if session.log().path().is_none() {
                self.inner
                    .retired
                    .lock()
                    .unwrap()
                    .insert(id.clone(), LogView::of(session.log()));
            }
        }
        if !expired.is_empty() {
            tracing::info!(count = expired.len(), "expired idle sessions");
        }
        expired.len()
    }

    /// Finds a recent report for `(prompt, document, revision)`.
    pub(crate) fn recent_report(&self, prompt: &str, document: &str, revision: u64) -> Option<HighlightReport> {
        let highlights = self.inner.highlights.lock().unwrap();
        highlights
            .recent
            .iter()
            .rev()
            .find(|r| r.prompt == prompt && r.document == document && r.revision == revision)
            .cloned()
    }

    pub(crate) fn remember_report(&self, report: &HighlightReport, edit: Option<EditApplied>) -> Result<()> {
        let mut highlights = self.inner.highlights.lock().unwrap();
        if highlights.recent.len() == RECENT_REPORTS {
            highlights.recent.pop_front();
        }
        highlights.recent.push_back(report.clone());
        if let Some(log) = highlights.log.as_mut() {
            if let Some(edit) = edit {
                log.record(EventKind::EditApplied(edit))?;
            }
            log.record(EventKind::HighlightShown(HighlightShown {
                prompt: report.prompt.clone(),
                document: report.document.clone(),
                revision: report.revision,
                spans: report.spans.len(),
                highlighted: report.highlighted().map(|s| [s.char_start, s.char_end]).collect(),
            }))?;
        }
        Ok(())
    }
}
