//! Composing the assistant's response with predictive text.
//!
//! A [`Session`] holds a conversation whose last turn is the user's request.
//! The user builds the assistant's reply one step at a time, either by
//! accepting one of the top-k suggestion buttons or by typing. Each button
//! shows the next token plus a short greedy preview of where it leads, and
//! accepting a button commits both.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backend::{greedy_continue, Backend, CacheHandle, DistributionRow, TokenId, DEFAULT_TOP_M};
use crate::chat::{validate_conversation, ChatMessage, Conversation, Role};
use crate::error::{Error, Result};
use crate::feedback::event::{self, EventKind, LoggedToken};
use crate::feedback::{amplification_ratio, AmplificationReport, EventLog};

pub const MAX_K: usize = 10;

/// Display text of the suggestion that ends the response.
pub const DONE_DISPLAY: &str = "⏎ done";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// Number of suggestion buttons.
    pub k: usize,
    /// Tokens per button: the head plus `phrase_tokens - 1` preview tokens.
    pub phrase_tokens: usize,
    pub top_m: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            k: 3,
            phrase_tokens: 2,
            top_m: DEFAULT_TOP_M,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_K).contains(&self.k) {
            return Err(Error::InvalidArgument(format!(
                "k must be between 1 and {MAX_K}, got {}",
                self.k
            )));
        }
        if self.phrase_tokens == 0 {
            return Err(Error::InvalidArgument("phrase_tokens must be at least 1".into()));
        }
        if self.top_m < self.k {
            return Err(Error::InvalidArgument(format!(
                "top_m ({}) must be at least k ({})",
                self.top_m, self.k
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub rank: usize,
    pub head_token: TokenId,
    pub head_text: String,
    pub preview_tokens: Vec<TokenId>,
    pub preview_text: String,
    pub display: String,
    #[serde(with = "crate::serde_ext::float")]
    pub head_logprob: f64,
    /// Accepting this suggestion ends the response.
    pub end_of_response: bool,
}

/// Serializable snapshot of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub conversation: Conversation,
    pub composed_tokens: Vec<TokenId>,
    pub composed_text: String,
    pub config: SessionConfig,
    pub revision: u64,
    pub covered_tokens: usize,
    pub finalized: bool,
}

pub struct Session {
    backend: Arc<dyn Backend>,
    config: SessionConfig,
    conversation: Conversation,
    prompt_tokens: Vec<TokenId>,
    composed_tokens: Vec<TokenId>,
    composed_text: String,
    handle: CacheHandle,
    frontier: DistributionRow,
    revision: u64,
    current: Vec<Suggestion>,
    log: EventLog,
    outcome: Option<(ChatMessage, AmplificationReport)>,
}

impl Drop for Session {
    fn drop(&mut self) {
        self.backend.release(&self.handle);
    }
}

/// Checks a conversation can seed a session: it must alternate roles and end
/// with the user's request.
pub fn validate_request(conversation: &[ChatMessage], config: &SessionConfig) -> Result<()> {
    config.validate()?;
    validate_conversation(conversation)?;
    if conversation.last().map(|m| m.role) != Some(Role::User) {
        return Err(Error::Protocol("conversation must end with a user message".into()));
    }
    Ok(())
}

impl Session {
    /// Starts a session with an in-memory log and a fresh id.
    pub fn start(
        backend: Arc<dyn Backend>,
        conversation: Conversation,
        config: SessionConfig,
    ) -> Result<(Self, Vec<Suggestion>)> {
        let log = EventLog::in_memory(uuid::Uuid::new_v4().to_string(), backend.model_id());
        Self::start_with_log(backend, conversation, config, log)
    }

    pub fn start_with_log(
        backend: Arc<dyn Backend>,
        conversation: Conversation,
        config: SessionConfig,
        mut log: EventLog,
    ) -> Result<(Self, Vec<Suggestion>)> {
        validate_request(&conversation, &config)?;
        let mut with_turn = conversation.clone();
        with_turn.push(ChatMessage::assistant(""));
        let prompt_tokens = backend.render_chat(&with_turn)?.tokens;
        let (handle, mut rows) = backend.prefill(&prompt_tokens, config.top_m)?;
        let frontier = rows.pop().expect("rendered chat is never empty");

        log.record(EventKind::SessionStart(event::SessionStart {
            messages: conversation.clone(),
            k: config.k,
            phrase_tokens: config.phrase_tokens,
            top_m: config.top_m,
            model_id: backend.model_id().to_string(),
            prompt_tokens: prompt_tokens.clone(),
        }))?;

        let mut session = Self {
            backend,
            config,
            conversation,
            prompt_tokens,
            composed_tokens: Vec::new(),
            composed_text: String::new(),
            handle,
            frontier,
            revision: 0,
            current: Vec::new(),
            log,
            outcome: None,
        };
        let suggestions = session.get_suggestions()?;
        Ok((session, suggestions))
    }

    pub fn id(&self) -> &str {
        self.log.session_id()
    }

    pub fn config(&self) -> SessionConfig {
        self.config
    }

    pub fn conversation(&self) -> &[ChatMessage] {
        &self.conversation
    }

    pub fn prompt_tokens(&self) -> &[TokenId] {
        &self.prompt_tokens
    }

    pub fn composed_tokens(&self) -> &[TokenId] {
        &self.composed_tokens
    }

    pub fn composed_text(&self) -> &str {
        &self.composed_text
    }

    pub fn cache_handle(&self) -> &CacheHandle {
        &self.handle
    }

    /// Revision of the suggestion set currently on screen.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn suggestions(&self) -> &[Suggestion] {
        &self.current
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn is_finalized(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn outcome(&self) -> Option<&(ChatMessage, AmplificationReport)> {
        self.outcome.as_ref()
    }

    pub fn state(&self) -> SessionState {
        SessionState {
            session_id: self.id().to_string(),
            conversation: self.conversation.clone(),
            composed_tokens: self.composed_tokens.clone(),
            composed_text: self.composed_text.clone(),
            config: self.config,
            revision: self.revision,
            covered_tokens: self.handle.len(),
            finalized: self.is_finalized(),
        }
    }

    /// Recomputes the suggestion set for the current composition, logs it as
    /// shown, and bumps the revision.
    pub fn get_suggestions(&mut self) -> Result<Vec<Suggestion>> {
        self.ensure_live()?;
        let suggestions = self.compute_suggestions()?;
        self.revision += 1;
        self.current = suggestions.clone();
        self.log.record(EventKind::SuggestionsShown(event::SuggestionsShown {
            revision: self.revision,
            context_len: self.handle.len(),
            suggestions: suggestions.clone(),
        }))?;
        Ok(suggestions)
    }

    /// Accepts suggestion `rank` from the set currently shown.
    pub fn accept(&mut self, rank: usize) -> Result<Vec<Suggestion>> {
        self.accept_at(self.revision, rank)
    }

    /// Accepts suggestion `rank` from the set with the given revision. Any
    /// other revision, or a rank beyond the shown set, is stale.
    pub fn accept_at(&mut self, revision: u64, rank: usize) -> Result<Vec<Suggestion>> {
        self.ensure_live()?;
        if revision != self.revision || rank >= self.current.len() {
            return Err(Error::StaleSuggestion {
                revision,
                rank,
                current: self.revision,
                shown: self.current.len(),
            });
        }
        let chosen = self.current[rank].clone();
        let k_shown = self.current.len();

        if chosen.end_of_response {
            self.log.record(EventKind::Accept(event::Accept {
                revision,
                rank,
                k_shown,
                end_of_response: true,
                tokens: Vec::new(),
            }))?;
            self.finalize()?;
            return Ok(Vec::new());
        }

        let mut target = self.composed_tokens.clone();
        target.push(chosen.head_token);
        target.extend(&chosen.preview_tokens);
        let appended = target[self.composed_tokens.len()..].to_vec();
        let logprobs = self.resync(target)?;
        self.log.record(EventKind::Accept(event::Accept {
            revision,
            rank,
            k_shown,
            end_of_response: false,
            tokens: self.logged_tokens(&appended, &logprobs)?,
        }))?;
        self.get_suggestions()
    }

    /// Appends free-typed text. The composition is re-tokenized as a whole and
    /// the cache is kept up to the longest unchanged token prefix.
    pub fn type_text(&mut self, text: &str) -> Result<Vec<Suggestion>> {
        self.ensure_live()?;
        if text.is_empty() {
            return Err(Error::InvalidArgument("typed text is empty".into()));
        }
        let joined = self.backend.append_text(&self.composed_text, text);
        let target = self.backend.token_ids(&joined)?;
        if target == self.composed_tokens {
            return Ok(self.current.clone());
        }
        let retained = common_prefix(&self.composed_tokens, &target);
        let appended = target[retained..].to_vec();
        let logprobs = self.resync(target)?;
        self.log.record(EventKind::Type(event::Typed {
            text: text.to_string(),
            retained,
            tokens: self.logged_tokens(&appended, &logprobs)?,
        }))?;
        self.get_suggestions()
    }

    /// Removes the last `n_tokens` composed tokens.
    pub fn undo(&mut self, n_tokens: usize) -> Result<Vec<Suggestion>> {
        self.ensure_live()?;
        let len = self.composed_tokens.len();
        if n_tokens > len {
            return Err(Error::OutOfBounds {
                what: "undo count",
                value: n_tokens,
                limit: len,
            });
        }
        if n_tokens == 0 {
            return Ok(self.current.clone());
        }
        let target = self.composed_tokens[..len - n_tokens].to_vec();
        self.resync(target)?;
        self.log.record(EventKind::Undo(event::Undo { n: n_tokens }))?;
        self.get_suggestions()
    }

    /// Ends the turn, returning the composed assistant message and the
    /// session's amplification report. The session rejects mutation afterwards.
    pub fn finalize(&mut self) -> Result<(ChatMessage, AmplificationReport)> {
        self.ensure_live()?;
        let message = ChatMessage::assistant(self.composed_text.clone());
        self.log.record(EventKind::Finalize(event::Finalize {
            text: self.composed_text.clone(),
        }))?;
        let report = amplification_ratio(self.log.events(), self.backend.as_ref())?;
        self.backend.release(&self.handle);
        self.current.clear();
        self.outcome = Some((message.clone(), report.clone()));
        Ok((message, report))
    }

    fn ensure_live(&self) -> Result<()> {
        if self.is_finalized() {
            Err(Error::Finalized)
        } else {
            Ok(())
        }
    }

    fn compute_suggestions(&self) -> Result<Vec<Suggestion>> {
        let eos = self.backend.eos();
        let mut out: Vec<Suggestion> = Vec::with_capacity(self.config.k);
        for candidate in &self.frontier.entries {
            if out.len() == self.config.k {
                break;
            }
            let suggestion = if candidate.token == eos {
                Suggestion {
                    rank: out.len(),
                    head_token: eos,
                    head_text: candidate.text.to_string(),
                    preview_tokens: Vec::new(),
                    preview_text: String::new(),
                    display: DONE_DISPLAY.to_string(),
                    head_logprob: candidate.logprob,
                    end_of_response: true,
                }
            } else {
                let preview = greedy_continue(
                    self.backend.as_ref(),
                    &self.handle,
                    candidate.token,
                    self.config.phrase_tokens - 1,
                    self.config.top_m,
                )?;
                let mut phrase = vec![candidate.token];
                phrase.extend(&preview);
                Suggestion {
                    rank: out.len(),
                    head_token: candidate.token,
                    head_text: self.backend.detokenize(&phrase[..1])?,
                    preview_text: self.backend.detokenize(&preview)?,
                    display: self.backend.detokenize(&phrase)?,
                    preview_tokens: preview,
                    head_logprob: candidate.logprob,
                    end_of_response: false,
                }
            };
            if suggestion.display.is_empty() || out.iter().any(|s| s.display == suggestion.display) {
                continue;
            }
            out.push(suggestion);
        }
        Ok(out)
    }

    /// Moves the composition to `target`, reusing the cache up to the common
    /// prefix. Returns the log-probabilities of the tokens past that prefix.
    fn resync(&mut self, target: Vec<TokenId>) -> Result<Vec<f64>> {
        let keep = common_prefix(&self.composed_tokens, &target);
        let (handle, frontier, logprobs) = match self.resync_incremental(keep, &target) {
            Err(Error::CacheMiss(_)) => self.resync_full(keep, &target)?,
            other => other?,
        };
        if handle != self.handle {
            self.backend.release(&self.handle);
        }
        self.handle = handle;
        self.frontier = frontier;
        self.composed_text = self.backend.detokenize(&target)?;
        self.composed_tokens = target;
        Ok(logprobs)
    }

    fn resync_incremental(&self, keep: usize, target: &[TokenId]) -> Result<(CacheHandle, DistributionRow, Vec<f64>)> {
        let base = self.prompt_tokens.len();
        let top_m = self.config.top_m;
        let (handle, frontier) = if keep < self.composed_tokens.len() {
            self.backend.truncate(&self.handle, base + keep, top_m)?
        } else {
            (self.handle.clone(), self.frontier.clone())
        };
        if keep == target.len() {
            return Ok((handle, frontier, Vec::new()));
        }
        let ext = self.backend.extend(&handle, &target[keep..], top_m);
        if handle != self.handle {
            self.backend.release(&handle);
        }
        let mut ext = ext?;
        let row = ext.rows.pop().expect("non-empty extension");
        Ok((ext.handle, row, ext.token_logprobs))
    }

    fn resync_full(&self, keep: usize, target: &[TokenId]) -> Result<(CacheHandle, DistributionRow, Vec<f64>)> {
        let base = self.prompt_tokens.len();
        let mut tokens = self.prompt_tokens.clone();
        tokens.extend(target);
        let (handle, mut rows) = self.backend.prefill(&tokens, self.config.top_m)?;
        let logprobs = rows[base + keep - 1..base + target.len() - 1]
            .iter()
            .map(|r| r.original_logprob.unwrap_or(f64::NEG_INFINITY))
            .collect();
        let frontier = rows.pop().expect("non-empty");
        Ok((handle, frontier, logprobs))
    }

    fn logged_tokens(&self, tokens: &[TokenId], logprobs: &[f64]) -> Result<Vec<LoggedToken>> {
        tokens
            .iter()
            .zip(logprobs)
            .map(|(&id, &logprob)| {
                Ok(LoggedToken {
                    id,
                    text: self.backend.detokenize(&[id])?,
                    logprob,
                })
            })
            .collect()
    }
}

fn common_prefix(a: &[TokenId], b: &[TokenId]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// Holds keystrokes of a partially typed word until a whitespace boundary
/// arrives, so that only whole words reach [`Session::type_text`].
#[derive(Debug, Default, Clone)]
pub struct KeystrokeBuffer {
    pending: String,
}

impl KeystrokeBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one keystroke. Returns the word to commit when `ch` ends one.
    pub fn push(&mut self, ch: char) -> Option<String> {
        if ch.is_whitespace() {
            self.flush()
        } else {
            self.pending.push(ch);
            None
        }
    }

    pub fn push_str(&mut self, text: &str) -> Vec<String> {
        text.chars().filter_map(|c| self.push(c)).collect()
    }

    pub fn backspace(&mut self) -> Option<char> {
        self.pending.pop()
    }

    pub fn pending(&self) -> &str {
        &self.pending
    }

    pub fn flush(&mut self) -> Option<String> {
        if self.pending.is_empty() {
            None
        } else {
            Some(std::mem::take(&mut self.pending))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::MockBackend;
    use crate::samples::CORPUS_A;

    fn backend() -> Arc<dyn Backend> {
        Arc::new(MockBackend::from_corpus(CORPUS_A))
    }

    fn start(k: usize, phrase_tokens: usize) -> (Session, Vec<Suggestion>) {
        Session::start(
            backend(),
            vec![ChatMessage::user("edit")],
            SessionConfig {
                k,
                phrase_tokens,
                ..Default::default()
            },
        )
        .unwrap()
    }

    fn displays(s: &[Suggestion]) -> Vec<&str> {
        s.iter().map(|s| s.display.as_str()).collect()
    }

    #[test]
    fn start_session_examples() {
        let (_, s) = start(2, 1);
        assert_eq!(displays(&s), [".", "the"]);
        let (_, s) = start(1, 2);
        assert_eq!(s.len(), 1);
        let err = Session::start(
            backend(),
            vec![ChatMessage::user("edit")],
            SessionConfig {
                k: 0,
                ..Default::default()
            },
        );
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
        let err = Session::start(
            backend(),
            vec![ChatMessage::user("edit"), ChatMessage::assistant("x")],
            SessionConfig::default(),
        );
        assert!(matches!(err, Err(Error::Protocol(_))));
    }

    #[test]
    fn start_logs_session_start_then_suggestions() {
        let (session, _) = start(2, 2);
        let kinds: Vec<_> = session.log().events().iter().map(|e| e.kind.name()).collect();
        assert_eq!(kinds, ["session_start", "suggestions_shown"]);
    }

    #[test]
    fn suggestions_after_the_and_dog() {
        let (mut session, _) = start(3, 2);
        let s = session.type_text("the").unwrap();
        assert_eq!(displays(&s), ["cat ran", "dog sat"]);
        assert_eq!(s[0].head_text, "cat");
        assert_eq!(s[0].preview_text, "ran");
        let s = session.type_text("dog").unwrap();
        assert_eq!(displays(&s), ["sat ."]);
    }

    #[test]
    fn single_token_phrases_have_no_preview() {
        let (mut session, _) = start(3, 1);
        let s = session.type_text("the").unwrap();
        assert_eq!(displays(&s), ["cat", "dog"]);
        assert!(s.iter().all(|s| s.preview_tokens.is_empty()));
    }

    #[test]
    fn end_of_sequence_becomes_done_button() {
        let (mut session, _) = start(3, 2);
        let s = session.type_text("the dog sat .").unwrap();
        assert_eq!(displays(&s), ["the cat", DONE_DISPLAY]);
        let s = session.accept(1).unwrap();
        assert!(s.is_empty());
        assert!(session.is_finalized());
        assert_eq!(session.outcome().unwrap().0, ChatMessage::assistant("the dog sat ."));
    }

    #[test]
    fn accept_appends_head_and_preview() {
        let (mut session, _) = start(2, 1);
        session.accept(1).unwrap();
        assert_eq!(session.composed_text(), "the");
        let (mut session, s) = start(2, 2);
        assert_eq!(displays(&s), [". the", "the cat"]);
        session.accept(1).unwrap();
        assert_eq!(session.composed_text(), "the cat");
        assert_eq!(session.composed_tokens().len(), 2);
    }

    #[test]
    fn accept_then_undo_restores_state() {
        let (mut session, before) = start(2, 1);
        let state = session.state();
        session.accept(1).unwrap();
        let after = session.undo(1).unwrap();
        assert_eq!(after, before);
        assert_eq!(session.composed_tokens(), state.composed_tokens);
        assert_eq!(session.composed_text(), state.composed_text);
    }

    #[test]
    fn stale_accepts_are_rejected() {
        let (mut session, _) = start(2, 1);
        assert!(matches!(session.accept(5), Err(Error::StaleSuggestion { .. })));
        let old = session.revision();
        session.type_text("the").unwrap();
        assert!(matches!(session.accept_at(old, 0), Err(Error::StaleSuggestion { .. })));
        assert!(session.accept_at(session.revision(), 0).is_ok());
    }

    #[test]
    fn typing_in_pieces_matches_typing_at_once() {
        let (mut a, _) = start(3, 2);
        a.type_text("the").unwrap();
        let sa = a.type_text("cat").unwrap();
        let (mut b, _) = start(3, 2);
        let sb = b.type_text("the cat").unwrap();
        assert_eq!(a.composed_tokens(), b.composed_tokens());
        assert_eq!(a.composed_text(), "the cat");
        assert_eq!(sa, sb);
    }

    #[test]
    fn typing_a_display_equals_accepting_it() {
        let (mut a, s) = start(3, 2);
        let display = s[1].display.clone();
        let sa = a.accept(1).unwrap();
        let (mut b, _) = start(3, 2);
        let sb = b.type_text(&display).unwrap();
        assert_eq!(a.composed_tokens(), b.composed_tokens());
        assert_eq!(sa, sb);
    }

    #[test]
    fn undo_examples() {
        let (mut session, initial) = start(3, 2);
        assert_eq!(session.undo(0).unwrap(), initial);
        session.type_text("the cat").unwrap();
        assert!(matches!(session.undo(3), Err(Error::OutOfBounds { .. })));
        assert_eq!(session.undo(2).unwrap(), initial);
        assert_eq!(session.composed_text(), "");
    }

    #[test]
    fn whitespace_only_typing_is_a_no_op() {
        let (mut session, initial) = start(3, 2);
        let events = session.log().events().len();
        assert_eq!(session.type_text("   ").unwrap(), initial);
        assert_eq!(session.log().events().len(), events);
        assert!(session.type_text("").is_err());
    }

    #[test]
    fn finalize_examples() {
        let (mut session, _) = start(3, 2);
        session.type_text("the cat").unwrap();
        let (message, _) = session.finalize().unwrap();
        assert_eq!(message, ChatMessage::assistant("the cat"));
        assert!(matches!(session.finalize(), Err(Error::Finalized)));
        assert!(matches!(session.type_text("x"), Err(Error::Finalized)));
        assert!(matches!(session.get_suggestions(), Err(Error::Finalized)));

        let (mut empty, _) = start(3, 2);
        let (message, report) = empty.finalize().unwrap();
        assert_eq!(message.content, "");
        assert_eq!(report.ratio, None);
    }

    #[test]
    fn cache_covers_rendered_conversation_with_composition() {
        let b = backend();
        let (mut session, _) =
            Session::start(b.clone(), vec![ChatMessage::user("edit")], SessionConfig::default()).unwrap();
        session.type_text("the dog").unwrap();
        session.accept(0).unwrap();
        let rendered = b
            .render_chat(&[
                ChatMessage::user("edit"),
                ChatMessage::assistant(session.composed_text()),
            ])
            .unwrap();
        assert_eq!(session.cache_handle().covered_tokens(), &rendered.tokens[..]);
    }

    #[test]
    fn eviction_falls_back_to_full_pass() {
        let b = backend();
        let (mut a, _) = Session::start(b.clone(), vec![ChatMessage::user("edit")], SessionConfig::default()).unwrap();
        let (mut c, _) = Session::start(backend(), vec![ChatMessage::user("edit")], SessionConfig::default()).unwrap();
        a.type_text("the").unwrap();
        c.type_text("the").unwrap();
        b.evict_all();
        let sa = a.type_text("cat sat").unwrap();
        let sc = c.type_text("cat sat").unwrap();
        assert_eq!(sa, sc);
        let last = |s: &Session| s.log().events()[s.log().events().len() - 2].kind.clone();
        assert_eq!(last(&a), last(&c), "logged token log-probabilities agree");
        b.evict_all();
        assert_eq!(a.undo(2).unwrap(), c.undo(2).unwrap());
    }

    #[test]
    fn keystroke_buffer_commits_at_whitespace() {
        let mut buf = KeystrokeBuffer::new();
        assert_eq!(buf.push('t'), None);
        assert_eq!(buf.push_str("he ca"), vec!["the".to_string()]);
        assert_eq!(buf.pending(), "ca");
        assert_eq!(buf.backspace(), Some('a'));
        assert_eq!(buf.flush(), Some("c".into()));
        assert_eq!(buf.push(' '), None);
    }
}
