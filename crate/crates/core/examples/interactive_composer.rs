//! A line-oriented composer on stdin.
//!
//! Type words to add them, `1`..`9` to accept a suggestion, `-` to undo one
//! token, and an empty line to finish. Pipe input for a scripted run:
//!
//! `printf 'the\n1\n-\n2\n\n' | cargo run --example interactive_composer`

use std::io::{self, BufRead, Write};
use std::sync::Arc;

use cowrite::predictive::{KeystrokeBuffer, SessionConfig};
use cowrite::samples::CORPUS_A;
use cowrite::{ChatMessage, MockBackend, Session, Suggestion};

fn prompt(session: &Session, suggestions: &[Suggestion]) -> io::Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "\n> {}", session.composed_text())?;
    for s in suggestions {
        let tag = if s.end_of_response { " (end)" } else { "" };
        writeln!(out, "  {}: {}{tag}", s.rank + 1, s.display)?;
    }
    write!(out, "? ")?;
    out.flush()
}

fn main() -> cowrite::Result<()> {
    let backend = Arc::new(MockBackend::from_corpus(CORPUS_A));
    let (mut session, mut shown) = Session::start(
        backend,
        vec![ChatMessage::user("tell me about the pets")],
        SessionConfig::default(),
    )?;
    let mut keys = KeystrokeBuffer::new();

    prompt(&session, &shown)?;
    for line in io::stdin().lock().lines() {
        let line = line?;
        let input = line.trim();
        if input.is_empty() {
            break;
        }
        shown = match input.parse::<usize>() {
            Ok(n) if (1..=shown.len()).contains(&n) => match session.accept(n - 1) {
                Ok(next) => next,
                Err(e) => {
                    eprintln!("{e}");
                    shown
                }
            },
            _ if input == "-" => session.undo(1.min(session.composed_tokens().len()))?,
            _ => {
                let mut words = keys.push_str(input);
                words.extend(keys.flush());
                session.type_text(&words.join(" "))?
            }
        };
        if session.is_finalized() {
            break;
        }
        prompt(&session, &shown)?;
    }

    let (message, report) = match session.outcome() {
        Some(done) => done.clone(),
        None => session.finalize()?,
    };
    println!("\n\nresponse: {}", message.content);
    println!("amplification ratio: {:?}", report.ratio);
    Ok(())
}
