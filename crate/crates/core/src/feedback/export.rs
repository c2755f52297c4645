//! Shown-versus-taken feedback dataset.
//!
//! Every suggestion set the user saw becomes one record holding the scored
//! context, all candidates with their log-probabilities, and what the user did
//! next. Candidates that were not taken are listed as rejected, which keeps
//! the counterfactual alternatives alongside the choice.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::event::{EventKind, LoggedToken};
use super::log::EventLog;
use crate::backend::TokenId;
use crate::error::{Error, Result};
use crate::predictive::Suggestion;

pub const FEEDBACK_SCHEMA: &str = "cowrite.feedback";
pub const FEEDBACK_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackHeader {
    pub schema: String,
    pub version: u32,
    pub session_id: String,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ChosenAction {
    Accept {
        rank: usize,
    },
    Type {
        text: String,
        tokens: Vec<LoggedToken>,
    },
    Undo {
        n: usize,
    },
    Finalize,
    /// The set was replaced by a refresh without any user action.
    Superseded,
    /// The log ends while this set is still on screen.
    Pending,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub session_id: String,
    pub seq: u64,
    pub revision: u64,
    pub context_tokens: Vec<TokenId>,
    pub candidates: Vec<Suggestion>,
    pub action: ChosenAction,
    pub rejected_ranks: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackDataset {
    pub header: FeedbackHeader,
    pub records: Vec<FeedbackRecord>,
}

impl FeedbackDataset {
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{}", serde_json::to_string(&self.header)?)?;
        for record in &self.records {
            writeln!(out, "{}", serde_json::to_string(record)?)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Builds the dataset from a session log alone; the context of each record
/// is reconstructed from the token deltas the log carries.
pub fn export_feedback(log: &EventLog) -> Result<FeedbackDataset> {
    let header = FeedbackHeader {
        schema: FEEDBACK_SCHEMA.into(),
        version: FEEDBACK_VERSION,
        session_id: log.session_id().to_string(),
        model_id: log.header().model_id.clone(),
    };
    let events = log.events();
    let mut records = Vec::new();
    let mut context: Vec<TokenId> = Vec::new();
    let mut prompt_len = 0;
    let mut open: Option<FeedbackRecord> = None;

    let mut close = |open: &mut Option<FeedbackRecord>, action: ChosenAction| {
        if let Some(mut record) = open.take() {
            let taken = match action {
                ChosenAction::Accept { rank } => Some(rank),
                _ => None,
            };
            record.rejected_ranks = (0..record.candidates.len()).filter(|&r| Some(r) != taken).collect();
            record.action = action;
            records.push(record);
        }
    };

    for event in events {
        match &event.kind {
            EventKind::SessionStart(start) => {
                context = start.prompt_tokens.clone();
                prompt_len = context.len();
            }
            EventKind::SuggestionsShown(shown) => {
                close(&mut open, ChosenAction::Superseded);
                if shown.context_len != context.len() {
                    return Err(Error::LogCorruption(format!(
                        "seq {}: context length {} does not match reconstructed {}",
                        event.seq,
                        shown.context_len,
                        context.len()
                    )));
                }
                open = Some(FeedbackRecord {
                    session_id: event.session_id.clone(),
                    seq: event.seq,
                    revision: shown.revision,
                    context_tokens: context.clone(),
                    candidates: shown.suggestions.clone(),
                    action: ChosenAction::Pending,
                    rejected_ranks: Vec::new(),
                });
            }
            EventKind::Accept(accept) => {
                if open.as_ref().map(|r| r.revision) != Some(accept.revision) {
                    return Err(Error::LogCorruption(format!(
                        "seq {}: accept references revision {} which is not the set on screen",
                        event.seq, accept.revision
                    )));
                }
                context.extend(accept.tokens.iter().map(|t| t.id));
                close(&mut open, ChosenAction::Accept { rank: accept.rank });
            }
            EventKind::Type(typed) => {
                context.truncate(prompt_len + typed.retained);
                context.extend(typed.tokens.iter().map(|t| t.id));
                close(
                    &mut open,
                    ChosenAction::Type {
                        text: typed.text.clone(),
                        tokens: typed.tokens.clone(),
                    },
                );
            }
            EventKind::Undo(undo) => {
                let keep = context
                    .len()
                    .checked_sub(undo.n)
                    .filter(|&k| k >= prompt_len)
                    .ok_or_else(|| Error::LogCorruption(format!("seq {}: undo exceeds composition", event.seq)))?;
                context.truncate(keep);
                close(&mut open, ChosenAction::Undo { n: undo.n });
            }
            EventKind::Finalize(_) => close(&mut open, ChosenAction::Finalize),
            EventKind::HighlightShown(_) | EventKind::EditApplied(_) => {}
        }
    }
    close(&mut open, ChosenAction::Pending);
    Ok(FeedbackDataset { header, records })
}
