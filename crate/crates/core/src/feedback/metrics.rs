//! Amplification ratio: information in the produced text over information
//! supplied by the user.
//!
//! Output is the surprisal, in bits, of every composed token given its left
//! context. Input is the information in the user's choices: picking one of
//! `k` shown suggestions is worth `log2 k` bits, and a typed token is worth
//! its own surprisal. Undo supplies nothing. A session typed entirely by hand
//! therefore has a ratio of exactly 1.

use serde::{Deserialize, Serialize};

use super::event::{EventKind, InteractionEvent};
use crate::backend::{Backend, TokenId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Accept,
    Type,
    Undo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionBits {
    pub seq: u64,
    pub action: ActionKind,
    pub input_bits: f64,
    /// Surprisal of the tokens this action produced that survive in the final
    /// composition.
    pub output_bits: f64,
    pub surviving_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplificationReport {
    pub output_bits: f64,
    pub input_bits: f64,
    /// `output_bits / input_bits`, absent when the user supplied no information.
    pub ratio: Option<f64>,
    pub per_action: Vec<ActionBits>,
}

/// Surprisal in bits. Zero-probability tokens are charged as a uniform draw
/// from the vocabulary so every action has a finite cost.
pub fn surprisal_bits(logprob: f64, vocab_size: u64) -> f64 {
    let bits = -logprob / std::f64::consts::LN_2;
    bits.min((vocab_size.max(2) as f64).log2())
}

/// Computes the report for a finalized session log. Composed tokens are
/// re-scored with a single pass over the rendered conversation.
pub fn amplification_ratio(events: &[InteractionEvent], backend: &dyn Backend) -> Result<AmplificationReport> {
    if !events.iter().any(|e| matches!(e.kind, EventKind::Finalize(_))) {
        return Err(Error::IncompleteSession);
    }
    let prompt_tokens = match events.first().map(|e| &e.kind) {
        Some(EventKind::SessionStart(start)) => &start.prompt_tokens,
        _ => return Err(Error::LogCorruption("log does not begin with session_start".into())),
    };
    let vocab = backend.vocab_size();

    // Composed tokens, each tagged with the index of the action that produced it.
    let mut composed: Vec<(TokenId, usize)> = Vec::new();
    let mut per_action: Vec<ActionBits> = Vec::new();
    // Individual input contributions in order, so an all-typed session sums
    // exactly the same terms as its output.
    let mut input_terms: Vec<f64> = Vec::new();
    for event in events {
        let action = per_action.len();
        match &event.kind {
            EventKind::Accept(accept) => {
                composed.extend(accept.tokens.iter().map(|t| (t.id, action)));
                let bits = (accept.k_shown.max(1) as f64).log2();
                input_terms.push(bits);
                per_action.push(ActionBits {
                    seq: event.seq,
                    action: ActionKind::Accept,
                    input_bits: bits,
                    output_bits: 0.0,
                    surviving_tokens: 0,
                });
            }
            EventKind::Type(typed) => {
                composed.truncate(typed.retained);
                composed.extend(typed.tokens.iter().map(|t| (t.id, action)));
                let start = input_terms.len();
                input_terms.extend(typed.tokens.iter().map(|t| surprisal_bits(t.logprob, vocab)));
                per_action.push(ActionBits {
                    seq: event.seq,
                    action: ActionKind::Type,
                    input_bits: input_terms[start..].iter().sum(),
                    output_bits: 0.0,
                    surviving_tokens: 0,
                });
            }
            EventKind::Undo(undo) => {
                let keep = composed.len().checked_sub(undo.n).ok_or_else(|| {
                    Error::LogCorruption(format!(
                        "seq {}: undo of {} tokens exceeds composition",
                        event.seq, undo.n
                    ))
                })?;
                composed.truncate(keep);
                per_action.push(ActionBits {
                    seq: event.seq,
                    action: ActionKind::Undo,
                    input_bits: 0.0,
                    output_bits: 0.0,
                    surviving_tokens: 0,
                });
            }
            EventKind::Finalize(_) => break,
            _ => {}
        }
    }

    let mut output_bits = 0.0;
    if !composed.is_empty() {
        let mut tokens = prompt_tokens.clone();
        tokens.extend(composed.iter().map(|(t, _)| *t));
        let rows = backend.forward_all(&tokens, 1)?;
        let base = prompt_tokens.len();
        for (j, &(_, action)) in composed.iter().enumerate() {
            let logprob = rows[base + j - 1].original_logprob.unwrap_or(f64::NEG_INFINITY);
            let bits = surprisal_bits(logprob, vocab);
            output_bits += bits;
            per_action[action].output_bits += bits;
            per_action[action].surviving_tokens += 1;
        }
    }

    let input_bits: f64 = input_terms.iter().sum();
    Ok(AmplificationReport {
        output_bits,
        input_bits,
        ratio: (input_bits > 0.0).then(|| output_bits / input_bits),
        per_action,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::backend::MockBackend;
    use crate::chat::ChatMessage;
    use crate::predictive::{Session, SessionConfig};
    use crate::samples::CORPUS_A;

    fn session(k: usize) -> Session {
        let backend: Arc<dyn Backend> = Arc::new(MockBackend::from_corpus(CORPUS_A));
        let config = SessionConfig {
            k,
            phrase_tokens: 1,
            ..Default::default()
        };
        Session::start(backend, vec![ChatMessage::user("edit")], config)
            .unwrap()
            .0
    }

    #[test]
    fn all_accept_session() {
        let mut s = session(2);
        s.accept(1).unwrap();
        s.accept(0).unwrap();
        assert_eq!(s.composed_text(), "the cat");
        let (_, report) = s.finalize().unwrap();
        let expected = -(3.0f64 / 13.0).log2() - (2.0f64 / 3.0).log2();
        assert!((report.output_bits - expected).abs() < 1e-12);
        assert!((report.output_bits - 2.700).abs() < 0.005);
        assert_eq!(report.input_bits, 2.0);
        assert!((report.ratio.unwrap() - 1.350).abs() < 0.003);
    }

    #[test]
    fn all_typed_session_has_unit_ratio() {
        let mut s = session(2);
        s.type_text("the").unwrap();
        s.type_text("cat").unwrap();
        let (_, report) = s.finalize().unwrap();
        assert_eq!(report.input_bits, report.output_bits);
        assert_eq!(report.ratio, Some(1.0));
    }

    #[test]
    fn empty_composition_has_no_ratio() {
        let mut s = session(2);
        let (_, report) = s.finalize().unwrap();
        assert_eq!(report.output_bits, 0.0);
        assert_eq!(report.input_bits, 0.0);
        assert_eq!(report.ratio, None);
    }

    #[test]
    fn unfinalized_log_is_incomplete() {
        let s = session(2);
        let backend = MockBackend::from_corpus(CORPUS_A);
        assert!(matches!(
            amplification_ratio(s.log().events(), &backend),
            Err(Error::IncompleteSession)
        ));
    }

    #[test]
    fn undone_tokens_do_not_count_as_output() {
        let mut s = session(3);
        s.type_text("the dog").unwrap();
        s.undo(1).unwrap();
        s.accept(0).unwrap();
        let (_, report) = s.finalize().unwrap();
        assert_eq!(report.per_action.len(), 3);
        assert_eq!(report.per_action[0].surviving_tokens, 1);
        assert_eq!(report.per_action[1].input_bits, 0.0);
        let sum: f64 = report.per_action.iter().map(|a| a.output_bits).sum();
        assert!((sum - report.output_bits).abs() < 1e-12);
        assert!(report.input_bits > report.per_action[0].output_bits);
    }

    #[test]
    fn unknown_words_are_charged_a_finite_cost() {
        let mut s = session(3);
        s.type_text("zebra").unwrap();
        let (_, report) = s.finalize().unwrap();
        assert!(report.output_bits.is_finite());
        assert_eq!(report.ratio, Some(1.0));
    }

    #[test]
    fn accept_beats_typing_exactly_when_surprisal_exceeds_choice_cost() {
        // After "the", k = 2 shows [cat (2/3), dog (1/3)]; accepting costs one bit.
        let ratio = |accept_rank: Option<usize>, word: &str| {
            let mut s = session(2);
            s.type_text("the").unwrap();
            match accept_rank {
                Some(rank) => s.accept(rank).unwrap(),
                None => s.type_text(word).unwrap(),
            };
            s.finalize().unwrap().1.ratio.unwrap()
        };
        assert!(ratio(Some(1), "dog") > ratio(None, "dog"));
        assert!(ratio(Some(0), "cat") < ratio(None, "cat"));
    }
}
