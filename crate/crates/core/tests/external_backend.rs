mod common;

use std::sync::Arc;
use std::time::Duration;

use common::{dyn_mock, mock};
use cowrite::backend::{Backend, ExternalBackend, TokenId};
use cowrite::feedback::replay;
use cowrite::highlight::HighlightEngine;
use cowrite::predictive::{Session, SessionConfig};
use cowrite::samples::{FIXTURE_DOCUMENT, FIXTURE_PROMPT, SIX_HATS_DOCUMENT, SIX_HATS_PROMPT};
use cowrite::service::backend_router;
use cowrite::{ChatMessage, Error};

/// Serves the mock over the inference protocol on a background runtime.
fn spawn_server() -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    listener.set_nonblocking(true).unwrap();
    std::thread::spawn(move || {
        let runtime = tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .unwrap();
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            axum::serve(listener, backend_router(dyn_mock())).await.unwrap();
        });
    });
    format!("http://{addr}")
}

fn connect() -> ExternalBackend {
    ExternalBackend::connect(&spawn_server(), Duration::from_secs(5)).unwrap()
}

#[test]
fn mirrors_the_served_backend() {
    let remote = connect();
    let local = mock();
    assert_eq!(remote.model_id(), local.model_id());
    assert_eq!(remote.vocab_size(), local.vocab_size());
    assert_eq!(remote.eos(), local.eos());
    assert_eq!(remote.context_limit(), local.context_limit());

    let text = "the cat  sat . zebra";
    assert_eq!(remote.tokenize(text).unwrap(), local.tokenize(text).unwrap());
    let tokens = local.token_ids(text).unwrap();
    assert_eq!(remote.detokenize(&tokens).unwrap(), local.detokenize(&tokens).unwrap());
    assert_eq!(remote.append_text("the", "cat"), local.append_text("the", "cat"));

    let chat = [ChatMessage::user("edit"), ChatMessage::assistant("the")];
    assert_eq!(remote.render_chat(&chat).unwrap(), local.render_chat(&chat).unwrap());
    assert_eq!(
        remote.forward_all(&tokens, 5).unwrap(),
        local.forward_all(&tokens, 5).unwrap()
    );
}

#[test]
fn cached_operations_match_a_local_pass() {
    let remote = connect();
    let local = mock();
    let tokens = local.token_ids("the cat sat . the dog").unwrap();
    let full = local.forward_all(&tokens, 4).unwrap();

    let (handle, rows) = remote.prefill(&tokens[..2], 4).unwrap();
    assert_eq!(rows[0], full[0]);
    let ext = remote.extend(&handle, &tokens[2..], 4).unwrap();
    assert_eq!(ext.rows, full[2..]);
    let expected: Vec<f64> = full[1..tokens.len() - 1]
        .iter()
        .map(|r| r.original_logprob.unwrap())
        .collect();
    assert_eq!(ext.token_logprobs, expected);

    let (short, row) = remote.truncate(&ext.handle, 3, 4).unwrap();
    assert_eq!(short.covered_tokens(), &tokens[..3]);
    assert_eq!(row.entries, full[2].entries);
    assert_eq!(row.original_logprob, None);

    remote.evict_all();
    assert!(matches!(
        remote.extend(&short, &tokens[3..4], 4),
        Err(Error::CacheMiss(_))
    ));
}

#[test]
fn sessions_and_highlights_agree_with_the_mock() {
    let remote: Arc<dyn Backend> = Arc::new(connect());
    let config = SessionConfig {
        k: 3,
        phrase_tokens: 2,
        ..Default::default()
    };
    let (mut a, _) = Session::start(remote.clone(), vec![ChatMessage::user("edit")], config).unwrap();
    let (mut b, _) = Session::start(dyn_mock(), vec![ChatMessage::user("edit")], config).unwrap();
    for s in [&mut a, &mut b] {
        s.type_text("the").unwrap();
        s.type_text("cat").unwrap();
        s.accept(0).unwrap();
        s.undo(1).unwrap();
    }
    assert_eq!(a.suggestions(), b.suggestions());
    assert_eq!(a.composed_tokens(), b.composed_tokens());
    let report = a.finalize().unwrap().1;
    assert_eq!(report, b.finalize().unwrap().1);

    // A log recorded against the remote model replays against the local one.
    let outcome = replay(a.log(), dyn_mock()).unwrap();
    assert_eq!(outcome.composed_text, a.composed_text());

    for (prompt, doc) in [(FIXTURE_PROMPT, FIXTURE_DOCUMENT), (SIX_HATS_PROMPT, SIX_HATS_DOCUMENT)] {
        let r = HighlightEngine::new(remote.clone())
            .compute_highlights(prompt, doc)
            .unwrap();
        let l = HighlightEngine::new(dyn_mock())
            .compute_highlights(prompt, doc)
            .unwrap();
        assert_eq!(r, l);
    }
}

#[test]
fn server_errors_surface() {
    let remote = connect();
    let too_long = vec![TokenId(4); remote.context_limit() + 1];
    assert!(matches!(
        remote.forward_all(&too_long, 4),
        Err(Error::ContextOverflow { .. })
    ));
    assert!(matches!(remote.forward_all(&[TokenId(999)], 4), Err(Error::Backend(_))));
    assert!(matches!(remote.forward_all(&[], 4), Err(Error::InvalidArgument(_))));
    assert!(matches!(
        remote.forward_all(&[TokenId(4)], 0),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn unreachable_server_is_a_backend_error() {
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let result = ExternalBackend::connect(&format!("http://127.0.0.1:{port}"), Duration::from_millis(500));
    assert!(matches!(result, Err(Error::Backend(_))));
}
