use serde::{Deserialize, Serialize};

use crate::backend::TokenId;
use crate::chat::ChatMessage;
use crate::predictive::Suggestion;

/// One line of an interaction log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub session_id: String,
    pub seq: u64,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventKind {
    SessionStart(SessionStart),
    SuggestionsShown(SuggestionsShown),
    Accept(Accept),
    Type(Typed),
    Undo(Undo),
    Finalize(Finalize),
    HighlightShown(HighlightShown),
    EditApplied(EditApplied),
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::SessionStart(_) => "session_start",
            EventKind::SuggestionsShown(_) => "suggestions_shown",
            EventKind::Accept(_) => "accept",
            EventKind::Type(_) => "type",
            EventKind::Undo(_) => "undo",
            EventKind::Finalize(_) => "finalize",
            EventKind::HighlightShown(_) => "highlight_shown",
            EventKind::EditApplied(_) => "edit_applied",
        }
    }
}

/// A committed token with its log-probability given the left context at the
/// time it was committed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedToken {
    pub id: TokenId,
    pub text: String,
    #[serde(with = "crate::serde_ext::float")]
    pub logprob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStart {
    pub messages: Vec<ChatMessage>,
    pub k: usize,
    pub phrase_tokens: usize,
    pub top_m: usize,
    pub model_id: String,
    /// Rendered conversation ending with the open assistant turn.
    pub prompt_tokens: Vec<TokenId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionsShown {
    pub revision: u64,
    /// Number of tokens in the scored context (prompt plus composition).
    pub context_len: usize,
    pub suggestions: Vec<Suggestion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accept {
    pub revision: u64,
    pub rank: usize,
    pub k_shown: usize,
    pub end_of_response: bool,
    pub tokens: Vec<LoggedToken>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Typed {
    pub text: String,
    /// Composed tokens kept before the newly committed ones.
    pub retained: usize,
    pub tokens: Vec<LoggedToken>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Undo {
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finalize {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightShown {
    pub prompt: String,
    pub document: String,
    pub revision: u64,
    pub spans: usize,
    /// Byte ranges of highlighted spans.
    pub highlighted: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditApplied {
    pub char_start: usize,
    pub char_end: usize,
    pub replacement: String,
    pub revision: u64,
}
