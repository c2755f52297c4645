mod common;

use common::{dyn_mock, mock, WORDS};
use cowrite::backend::{rank_order, Backend, TokenId};
use cowrite::feedback::{amplification_ratio, EventLog};
use cowrite::highlight::HighlightEngine;
use cowrite::predictive::{Session, SessionConfig};
use cowrite::ChatMessage;
use proptest::prelude::*;

fn word() -> impl Strategy<Value = &'static str> {
    prop::sample::select(&WORDS[..])
}

fn words(max: usize) -> impl Strategy<Value = Vec<&'static str>> {
    prop::collection::vec(word(), 1..=max)
}

fn separator() -> impl Strategy<Value = &'static str> {
    prop::sample::select(&[" ", "  ", "\n", "\t", " \n "][..])
}

/// Free-form text: words joined by assorted whitespace, with optional padding.
fn spaced_text() -> impl Strategy<Value = String> {
    prop::collection::vec((word(), separator()), 0..12).prop_map(|parts| {
        parts.into_iter().fold(String::new(), |mut acc, (w, sep)| {
            acc.push_str(sep);
            acc.push_str(w);
            acc
        })
    })
}

#[derive(Debug, Clone)]
enum Action {
    Accept(usize),
    Type(Vec<&'static str>),
    Undo(usize),
}

fn action() -> impl Strategy<Value = Action> {
    prop_oneof![
        (0usize..5).prop_map(Action::Accept),
        words(3).prop_map(Action::Type),
        (0usize..4).prop_map(Action::Undo),
    ]
}

fn session(k: usize, phrase_tokens: usize) -> Session {
    let config = SessionConfig {
        k,
        phrase_tokens,
        ..Default::default()
    };
    Session::start(dyn_mock(), vec![ChatMessage::user("edit")], config)
        .unwrap()
        .0
}

fn run(s: &mut Session, actions: &[Action]) {
    for a in actions {
        match a {
            Action::Accept(r) => {
                let live: Vec<usize> = s
                    .suggestions()
                    .iter()
                    .filter(|x| !x.end_of_response)
                    .map(|x| x.rank)
                    .collect();
                if !live.is_empty() {
                    s.accept(live[r % live.len()]).unwrap();
                }
            }
            Action::Type(w) => {
                s.type_text(&w.join(" ")).unwrap();
            }
            Action::Undo(n) => {
                let n = (*n).min(s.composed_tokens().len());
                s.undo(n).unwrap();
            }
        }
    }
}

proptest! {
    #[test]
    fn tokenize_offsets_and_round_trip(text in spaced_text()) {
        let b = mock();
        let spans = b.tokenize(&text).unwrap();
        let mut last_end = 0;
        for span in &spans {
            prop_assert!(span.char_start >= last_end && span.char_start < span.char_end);
            prop_assert_eq!(&text[span.char_start..span.char_end], span.text.as_str());
            last_end = span.char_end;
        }
        let ids: Vec<TokenId> = spans.iter().map(|s| s.token).collect();
        let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ");
        prop_assert_eq!(b.detokenize(&ids).unwrap(), normalized.clone());
        prop_assert_eq!(b.token_ids(&normalized).unwrap(), ids);
    }

    #[test]
    fn rows_are_valid_distributions(prev in word(), top_m in 1usize..10) {
        let b = mock();
        let prev = b.token_ids(prev).unwrap()[0];
        let full = b.full_distribution(prev);
        let mass: f64 = full.iter().map(|c| c.logprob.exp()).sum();
        prop_assert!((mass - 1.0).abs() <= 1e-9);
        prop_assert!(full.windows(2).all(|w| rank_order(&w[0], &w[1]).is_le()));
        prop_assert!(full.iter().all(|c| c.logprob <= 0.0 && c.logprob.is_finite()));
        let rows = b.forward_all(&[prev], top_m).unwrap();
        prop_assert_eq!(&rows[0].entries[..], &full[..full.len().min(top_m)]);
    }

    #[test]
    fn extension_equals_full_pass(ws in words(25), cut in 0.0f64..1.0, top_m in 1usize..8) {
        let b = mock();
        let tokens = b.token_ids(&ws.join(" ")).unwrap();
        let cut = 1 + ((tokens.len() - 1) as f64 * cut) as usize;
        let full = b.forward_all(&tokens, top_m).unwrap();
        let (handle, _) = b.prefill(&tokens[..cut], top_m).unwrap();
        if cut < tokens.len() {
            let ext = b.extend(&handle, &tokens[cut..], top_m).unwrap();
            prop_assert_eq!(&ext.rows[..], &full[cut..]);
            prop_assert_eq!(ext.handle.covered_tokens(), &tokens[..]);
            let (back, row) = b.truncate(&ext.handle, cut, top_m).unwrap();
            prop_assert_eq!(back.covered_tokens(), &tokens[..cut]);
            prop_assert_eq!(&row.entries, &full[cut - 1].entries);
        }
    }

    #[test]
    fn suggestions_are_sound(actions in prop::collection::vec(action(), 0..12), k in 1usize..8, phrase in 1usize..4) {
        let b = mock();
        let mut s = session(k, phrase);
        run(&mut s, &actions);
        let frontier = s.cache_handle().covered_tokens().last().copied().unwrap();
        let row = b.full_distribution(frontier);
        let shown = s.suggestions();
        prop_assert!(shown.len() <= k);
        if shown.len() < k {
            prop_assert_eq!(shown.len(), row.len().min(SessionConfig::default().top_m));
        }
        let mut displays: Vec<&str> = shown.iter().map(|x| x.display.as_str()).collect();
        displays.sort();
        displays.dedup();
        prop_assert_eq!(displays.len(), shown.len());
        for (i, sug) in shown.iter().enumerate() {
            prop_assert_eq!(sug.rank, i);
            prop_assert!(!sug.display.is_empty());
            prop_assert!(sug.preview_tokens.len() < phrase);
            prop_assert_eq!(sug.head_logprob, b.logprob(frontier, sug.head_token));
            prop_assert!(sug.head_logprob.is_finite());
        }
        prop_assert!(shown.windows(2).all(|w| w[0].head_logprob >= w[1].head_logprob));
    }

    #[test]
    fn typing_the_final_text_reaches_the_same_state(actions in prop::collection::vec(action(), 0..20), k in 1usize..6) {
        let mut s = session(k, 2);
        run(&mut s, &actions);
        let mut typed = session(k, 2);
        if !s.composed_text().is_empty() {
            typed.type_text(s.composed_text()).unwrap();
        }
        prop_assert_eq!(typed.composed_tokens(), s.composed_tokens());
        prop_assert_eq!(typed.suggestions(), s.suggestions());
        prop_assert_eq!(typed.cache_handle().covered_tokens(), s.cache_handle().covered_tokens());
    }

    #[test]
    fn metrics_are_additive(actions in prop::collection::vec(action(), 0..15)) {
        let mut s = session(3, 2);
        run(&mut s, &actions);
        let (_, report) = s.finalize().unwrap();
        let parts: f64 = report.per_action.iter().map(|a| a.output_bits).sum();
        prop_assert!((parts - report.output_bits).abs() <= 1e-9);
        prop_assert!(report.output_bits >= 0.0 && report.input_bits >= 0.0);
        prop_assert_eq!(report.ratio.is_some(), report.input_bits > 0.0);
        let reparsed = EventLog::parse(&s.log().to_jsonl().unwrap()).unwrap();
        prop_assert_eq!(reparsed.events(), s.log().events());
        prop_assert_eq!(amplification_ratio(reparsed.events(), mock().as_ref()).unwrap(), report);
    }

    #[test]
    fn highlight_invariants(doc in words(20), prompt in words(5)) {
        let b = mock();
        let document = doc.join(" ");
        let report = HighlightEngine::new(dyn_mock()).compute_highlights(&prompt.join(" "), &document).unwrap();
        let spans = b.tokenize(&document).unwrap();
        let marker = b.render_chat(&[ChatMessage::user("x"), ChatMessage::assistant("")]).unwrap().tokens[2];
        prop_assert_eq!(report.spans.len(), spans.len());
        for (i, (h, t)) in report.spans.iter().zip(&spans).enumerate() {
            prop_assert_eq!((h.char_start, h.char_end), (t.char_start, t.char_end));
            let prev = if i == 0 { marker } else { spans[i - 1].token };
            let other = b.full_distribution(prev).iter().any(|c| c.token != t.token);
            prop_assert_eq!(h.alternative_text.is_some(), other);
            prop_assert_eq!(h.margin.is_some(), other);
            if h.highlighted {
                prop_assert!(h.margin.unwrap() > 0.0);
            }
            if let Some(alt) = &h.alternative_text {
                prop_assert_ne!(alt, &h.original_token_text);
            }
            prop_assert_eq!(report.alternative_at(h.char_start).unwrap(), h);
        }
    }

    #[test]
    fn edits_equal_recompute(doc in words(15), at in 0usize..15, replacement in words(3), delete in any::<bool>()) {
        let engine = HighlightEngine::new(dyn_mock());
        let document = doc.join(" ");
        let report = engine.compute_highlights("edit", &document).unwrap();
        let span = &report.spans[at % report.spans.len()];
        let text = if delete { String::new() } else { replacement.join(" ") };
        let edited_doc = format!("{}{}{}", &document[..span.char_start], text, &document[span.char_end..]);
        match engine.apply_edit(&report, span.char_start, span.char_end, &text) {
            Ok(edited) => {
                let full = engine.compute_highlights("edit", &edited_doc).unwrap();
                prop_assert_eq!(&edited.spans, &full.spans);
                prop_assert_eq!(&edited.document, &edited_doc);
            }
            Err(e) => prop_assert!(edited_doc.trim().is_empty(), "{e}"),
        }
    }
}
