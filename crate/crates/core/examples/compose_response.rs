//! Composes a reply by picking suggestions, typing a word and undoing one.
//!
//! `cargo run --example compose_response`

use std::sync::Arc;

use cowrite::predictive::SessionConfig;
use cowrite::samples::CORPUS_A;
use cowrite::{ChatMessage, MockBackend, Session, Suggestion};

fn show(label: &str, session: &Session, suggestions: &[Suggestion]) {
    let options: Vec<&str> = suggestions.iter().map(|s| s.display.as_str()).collect();
    println!("{label:<14} {:?} -> {options:?}", session.composed_text());
}

fn main() -> cowrite::Result<()> {
    let backend = Arc::new(MockBackend::from_corpus(CORPUS_A));
    let config = SessionConfig {
        k: 3,
        phrase_tokens: 2,
        ..Default::default()
    };
    let (mut session, shown) = Session::start(backend, vec![ChatMessage::user("describe the pet")], config)?;
    show("start", &session, &shown);

    let shown = session.accept(0)?;
    show("accept #0", &session, &shown);
    let shown = session.type_text("dog")?;
    show("type \"dog\"", &session, &shown);
    let shown = session.undo(1)?;
    show("undo 1", &session, &shown);
    let shown = session.accept(0)?;
    show("accept #0", &session, &shown);

    let (message, report) = session.finalize()?;
    println!(
        "\nfinal message: {}",
        serde_json::to_string(&message).expect("message serializes")
    );
    println!(
        "output {:.3} bits / input {:.3} bits = {:?}",
        report.output_bits, report.input_bits, report.ratio
    );
    Ok(())
}
