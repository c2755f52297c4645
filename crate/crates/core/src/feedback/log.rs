//! Append-only interaction logs.
//!
//! On disk a log is UTF-8 JSON lines: a [`LogHeader`] carrying the schema
//! version, then one [`InteractionEvent`] per line. Every event is flushed
//! before `record` returns.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::event::{EventKind, InteractionEvent};
use crate::error::{Error, Result};

pub const LOG_SCHEMA: &str = "cowrite.interaction-log";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema: String,
    pub version: u32,
    pub session_id: String,
    pub model_id: String,
    pub created_ms: u64,
}

/// Returned once an event is appended (and written, for file-backed logs).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ack {
    pub seq: u64,
}

pub struct EventLog {
    header: LogHeader,
    events: Vec<InteractionEvent>,
    file: Option<FileSink>,
}

struct FileSink {
    path: PathBuf,
    durable: bool,
    handle: Option<File>,
}

impl FileSink {
    fn write_line(&mut self, line: &str, header: &LogHeader) -> Result<()> {
        if self.handle.is_none() {
            let mut file = OpenOptions::new()
                .create_new(true)
                .append(true)
                .open(&self.path)
                .map_err(|e| Error::file(&self.path, e))?;
            writeln!(file, "{}", serde_json::to_string(header)?)?;
            self.handle = Some(file);
        }
        let file = self.handle.as_mut().unwrap();
        let mut buf = String::with_capacity(line.len() + 1);
        buf.push_str(line);
        buf.push('\n');
        file.write_all(buf.as_bytes())?;
        file.flush()?;
        if self.durable {
            file.sync_data()?;
        }
        Ok(())
    }
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl EventLog {
    pub fn in_memory(session_id: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            header: LogHeader {
                schema: LOG_SCHEMA.into(),
                version: LOG_VERSION,
                session_id: session_id.into(),
                model_id: model_id.into(),
                created_ms: now_ms(),
            },
            events: Vec::new(),
            file: None,
        }
    }

    /// A log that writes to `path`. The file is created, and must not already
    /// exist, when the first event is recorded. With `durable` set every
    /// append is synced to storage before it is acknowledged.
    pub fn to_file(
        path: impl Into<PathBuf>,
        session_id: impl Into<String>,
        model_id: impl Into<String>,
        durable: bool,
    ) -> Self {
        let mut log = Self::in_memory(session_id, model_id);
        log.file = Some(FileSink {
            path: path.into(),
            durable,
            handle: None,
        });
        log
    }

    pub fn header(&self) -> &LogHeader {
        &self.header
    }

    pub fn session_id(&self) -> &str {
        &self.header.session_id
    }

    pub fn events(&self) -> &[InteractionEvent] {
        &self.events
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|f| f.path.as_path())
    }

    pub fn next_seq(&self) -> u64 {
        self.events.len() as u64
    }

    /// Appends `kind` with the next sequence number and the current time.
    pub fn record(&mut self, kind: EventKind) -> Result<Ack> {
        let event = InteractionEvent {
            session_id: self.header.session_id.clone(),
            seq: self.next_seq(),
            timestamp: now_ms(),
            kind,
        };
        self.record_event(event)
    }

    /// Appends a fully formed event. Its sequence number must directly follow
    /// the last one in the log.
    pub fn record_event(&mut self, event: InteractionEvent) -> Result<Ack> {
        if event.session_id != self.header.session_id {
            return Err(Error::LogCorruption(format!(
                "event for session {} appended to log of session {}",
                event.session_id, self.header.session_id
            )));
        }
        let expected = self.next_seq();
        if event.seq != expected {
            return Err(Error::LogCorruption(format!(
                "sequence gap: expected seq {expected}, got {}",
                event.seq
            )));
        }
        if let Some(file) = self.file.as_mut() {
            let line = serde_json::to_string(&event)?;
            file.write_line(&line, &self.header)?;
        }
        self.events.push(event);
        Ok(Ack { seq: expected })
    }

    /// Parses a complete log. Any malformed or truncated line, header
    /// mismatch, or sequence gap is reported as corruption.
    pub fn parse(text: &str) -> Result<Self> {
        if !text.is_empty() && !text.ends_with('\n') {
            return Err(Error::LogCorruption("log is truncated (last line incomplete)".into()));
        }
        let mut lines = text.lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::LogCorruption("log is empty".into()))?;
        let header: LogHeader =
            serde_json::from_str(first).map_err(|e| Error::LogCorruption(format!("line 1: bad header: {e}")))?;
        if header.schema != LOG_SCHEMA {
            return Err(Error::LogCorruption(format!("unknown schema {:?}", header.schema)));
        }
        if header.version != LOG_VERSION {
            return Err(Error::LogCorruption(format!(
                "unsupported log version {}",
                header.version
            )));
        }
        let mut log = Self {
            header,
            events: Vec::new(),
            file: None,
        };
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let event: InteractionEvent =
                serde_json::from_str(line).map_err(|e| Error::LogCorruption(format!("line {}: {e}", i + 1)))?;
            log.record_event(event)
                .map_err(|e| Error::LogCorruption(format!("line {}: {e}", i + 1)))?;
        }
        Ok(log)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut text = String::new();
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|e| Error::file(path, e))?;
        Self::parse(&text)
    }

    /// Serialized form, identical to what a file-backed log writes.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&self.header)?;
        out.push('\n');
        for event in &self.events {
            out.push_str(&serde_json::to_string(event)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Reads only the header line of a log file.
    pub fn read_header(path: impl AsRef<Path>) -> Result<LogHeader> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::file(path, e))?;
        let mut line = String::new();
        BufReader::new(file).read_line(&mut line)?;
        serde_json::from_str(&line).map_err(|e| Error::LogCorruption(format!("bad header: {e}")))
    }
}
