//! Compares how much text each interaction style yields per bit of user input.
//!
//! `cargo run --example amplification_ratio`

use std::sync::Arc;

use cowrite::backend::Backend;
use cowrite::feedback::amplification_ratio;
use cowrite::predictive::SessionConfig;
use cowrite::samples::CORPUS_A;
use cowrite::{ChatMessage, MockBackend, Session};

fn main() -> cowrite::Result<()> {
    let backend: Arc<dyn Backend> = Arc::new(MockBackend::from_corpus(CORPUS_A));
    let config = SessionConfig {
        k: 2,
        phrase_tokens: 1,
        ..Default::default()
    };
    let prompt = || vec![ChatMessage::user("edit")];

    let (mut accepting, _) = Session::start(backend.clone(), prompt(), config)?;
    accepting.accept(1)?;
    accepting.accept(0)?;
    let (_, accepted) = accepting.finalize()?;

    let (mut typing, _) = Session::start(backend.clone(), prompt(), config)?;
    typing.type_text("the cat")?;
    let (_, typed) = typing.finalize()?;

    for (label, report) in [("accepting", &accepted), ("typing", &typed)] {
        println!(
            "{label:<10} output {:>6.3} bits  input {:>6.3} bits  ratio {:?}",
            report.output_bits, report.input_bits, report.ratio
        );
        for action in &report.per_action {
            println!(
                "    seq {:>2} {:?}: in {:.3}, out {:.3}",
                action.seq, action.action, action.input_bits, action.output_bits
            );
        }
    }

    // The same figures can be recomputed offline from the event log alone.
    let again = amplification_ratio(accepting.log().events(), backend.as_ref())?;
    assert_eq!(again, accepted);
    println!("\nrecomputed from the log: ratio {:?}", again.ratio);
    Ok(())
}
