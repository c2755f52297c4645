//! Serves a model over the inference protocol and scores through a remote client.
//!
//! `cargo run --example external_backend`

use std::sync::Arc;
use std::time::Duration;

use cowrite::backend::{Backend, ExternalBackend};
use cowrite::samples::{CORPUS_A, FIXTURE_DOCUMENT, FIXTURE_PROMPT};
use cowrite::service::backend_router;
use cowrite::{HighlightEngine, MockBackend};

fn main() -> cowrite::Result<()> {
    let runtime = tokio::runtime::Runtime::new()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let url = format!("http://{}", listener.local_addr()?);
    let served: Arc<dyn Backend> = Arc::new(MockBackend::from_corpus(CORPUS_A));
    runtime.spawn(async move { axum::serve(listener, backend_router(served)).await });

    let remote = ExternalBackend::connect(&url, Duration::from_secs(5))?;
    println!(
        "connected to {url}: model {} with {} tokens",
        remote.model_id(),
        remote.vocab_size()
    );

    let report = HighlightEngine::new(Arc::new(remote)).compute_highlights(FIXTURE_PROMPT, FIXTURE_DOCUMENT)?;
    for span in report.highlighted() {
        println!("{:?} could be {:?}", span.original_token_text, span.alternative_text);
    }
    Ok(())
}
