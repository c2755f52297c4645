//! Writes a session log to disk, replays it and exports preference records.
//!
//! `cargo run --example feedback_export`

use std::sync::Arc;

use cowrite::backend::Backend;
use cowrite::feedback::{export_feedback, replay};
use cowrite::predictive::SessionConfig;
use cowrite::samples::CORPUS_A;
use cowrite::{ChatMessage, EventLog, MockBackend, Session};

fn main() -> cowrite::Result<()> {
    let backend: Arc<dyn Backend> = Arc::new(MockBackend::from_corpus(CORPUS_A));
    let dir = std::env::temp_dir().join(format!("cowrite-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("session.jsonl");
    let _ = std::fs::remove_file(&path);

    let log = EventLog::to_file(&path, "example-session", backend.model_id(), true);
    let (mut session, _) = Session::start_with_log(
        backend.clone(),
        vec![ChatMessage::user("edit")],
        SessionConfig::default(),
        log,
    )?;
    session.type_text("the")?;
    session.accept(1)?;
    session.undo(1)?;
    session.accept(0)?;
    session.finalize()?;
    println!("log written to {}", path.display());

    let log = EventLog::read(&path)?;
    let outcome = replay(&log, backend)?;
    println!(
        "replayed {} events: {:?}, ratio {:?}",
        outcome.events_checked,
        outcome.composed_text,
        outcome.report.as_ref().and_then(|r| r.ratio)
    );

    let dataset = export_feedback(&log)?;
    for record in &dataset.records {
        println!(
            "revision {:>2}: shown {:?} chose {:?} rejected {:?}",
            record.revision,
            record.candidates.iter().map(|c| c.display.as_str()).collect::<Vec<_>>(),
            record.action,
            record.rejected_ranks
        );
    }
    dataset.write_jsonl(std::fs::File::create(dir.join("feedback.jsonl"))?)?;
    println!("dataset written to {}", dir.join("feedback.jsonl").display());
    Ok(())
}
