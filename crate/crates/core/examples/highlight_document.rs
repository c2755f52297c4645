//! Scores a document, prints its edit opportunities, then applies one.
//!
//! `cargo run --example highlight_document`

use std::sync::Arc;

use cowrite::samples::{CORPUS_A, FIXTURE_DOCUMENT, FIXTURE_PROMPT};
use cowrite::{HighlightEngine, HighlightReport, MockBackend};

fn print(report: &HighlightReport) {
    println!("document: {:?}", report.document);
    for span in &report.spans {
        let mark = if span.highlighted { "*" } else { " " };
        println!(
            " {mark} [{:>2}..{:<2}] {:<6} alt={:<8} margin={}",
            span.char_start,
            span.char_end,
            span.original_token_text,
            span.alternative_text.as_deref().unwrap_or("-"),
            span.margin.map_or("-".to_string(), |m| format!("{m:+.3}")),
        );
    }
}

fn main() -> cowrite::Result<()> {
    let engine = HighlightEngine::new(Arc::new(MockBackend::from_corpus(CORPUS_A)));
    let report = engine.compute_highlights(FIXTURE_PROMPT, FIXTURE_DOCUMENT)?;
    print(&report);

    // Hovering anywhere inside a highlighted word surfaces its alternative.
    let target = report.highlighted().next().expect("fixture has a highlight").clone();
    let hovered = report.alternative_at(target.char_start + 1)?;
    let alternative = hovered.alternative_text.clone().unwrap_or_default();
    println!("\nreplacing {:?} with {:?}", hovered.original_token_text, alternative);

    let edited = engine.apply_edit(&report, target.char_start, target.char_end, &alternative)?;
    print(&edited);
    Ok(())
}
