//! Re-executes a session log against a backend and checks that every event
//! the engine produces matches the logged one byte for byte (timestamps
//! aside).

use std::sync::Arc;

use super::event::EventKind;
use super::log::EventLog;
use super::metrics::AmplificationReport;
use crate::backend::{Backend, TokenId};
use crate::error::{Error, Result};
use crate::predictive::{Session, SessionConfig, Suggestion};

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub session_id: String,
    pub composed_text: String,
    pub composed_tokens: Vec<TokenId>,
    /// Every suggestion set shown, with its revision.
    pub suggestion_sets: Vec<(u64, Vec<Suggestion>)>,
    pub finalized: bool,
    pub report: Option<AmplificationReport>,
    pub events_checked: usize,
}

pub fn replay(log: &EventLog, backend: Arc<dyn Backend>) -> Result<ReplayOutcome> {
    let logged = log.events();
    let mut outcome = ReplayOutcome {
        session_id: log.session_id().to_string(),
        composed_text: String::new(),
        composed_tokens: Vec::new(),
        suggestion_sets: Vec::new(),
        finalized: false,
        report: None,
        events_checked: 0,
    };
    let Some(first) = logged.first() else {
        return Ok(outcome);
    };
    if log.header().model_id != backend.model_id() {
        return Err(Error::ReplayMismatch {
            seq: 0,
            detail: format!(
                "log was recorded with model {} but the backend is {}",
                log.header().model_id,
                backend.model_id()
            ),
        });
    }
    let EventKind::SessionStart(start) = &first.kind else {
        return Err(Error::LogCorruption("log does not begin with session_start".into()));
    };

    let config = SessionConfig {
        k: start.k,
        phrase_tokens: start.phrase_tokens,
        top_m: start.top_m,
    };
    let sink = EventLog::in_memory(log.session_id(), backend.model_id());
    let (mut session, _) =
        Session::start_with_log(backend, start.messages.clone(), config, sink).map_err(|e| mismatch(0, e))?;
    let mut cursor = compare(&session, log, 0)?;

    while cursor < logged.len() {
        let event = &logged[cursor];
        let result = match &event.kind {
            EventKind::Accept(accept) => session.accept_at(accept.revision, accept.rank).map(drop),
            EventKind::Type(typed) => session.type_text(&typed.text).map(drop),
            EventKind::Undo(undo) => session.undo(undo.n).map(drop),
            EventKind::Finalize(_) => session.finalize().map(drop),
            EventKind::SuggestionsShown(_) => session.get_suggestions().map(drop),
            other => {
                return Err(Error::LogCorruption(format!(
                    "seq {}: unexpected {} event in a composition log",
                    event.seq,
                    other.name()
                )))
            }
        };
        result.map_err(|e| mismatch(event.seq, e))?;
        let next = compare(&session, log, cursor)?;
        if next == cursor {
            return Err(Error::ReplayMismatch {
                seq: event.seq,
                detail: format!("{} produced no event on replay", event.kind.name()),
            });
        }
        cursor = next;
    }

    for event in session.log().events() {
        if let EventKind::SuggestionsShown(shown) = &event.kind {
            outcome
                .suggestion_sets
                .push((shown.revision, shown.suggestions.clone()));
        }
    }
    outcome.composed_text = session.composed_text().to_string();
    outcome.composed_tokens = session.composed_tokens().to_vec();
    outcome.finalized = session.is_finalized();
    outcome.report = session.outcome().map(|(_, report)| report.clone());
    outcome.events_checked = cursor;
    Ok(outcome)
}

fn mismatch(seq: u64, e: Error) -> Error {
    Error::ReplayMismatch {
        seq,
        detail: e.to_string(),
    }
}

/// Compares the events the session produced from `from` onward with the
/// logged ones and returns the new cursor.
fn compare(session: &Session, log: &EventLog, from: usize) -> Result<usize> {
    let produced = session.log().events();
    let logged = log.events();
    for (i, mine) in produced.iter().enumerate().skip(from) {
        let Some(theirs) = logged.get(i) else {
            return Err(Error::ReplayMismatch {
                seq: mine.seq,
                detail: format!("replay produced a {} event the log does not contain", mine.kind.name()),
            });
        };
        let a = serde_json::to_string(&mine.kind)?;
        let b = serde_json::to_string(&theirs.kind)?;
        if mine.seq != theirs.seq || a != b {
            return Err(Error::ReplayMismatch {
                seq: theirs.seq,
                detail: format!("logged {b} but replay produced {a}"),
            });
        }
    }
    Ok(produced.len())
}
