//! Shows that cached extension and truncation agree with a from-scratch pass.
//!
//! `cargo run --example prefix_cache`

use cowrite::backend::Backend;
use cowrite::samples::CORPUS_A;
use cowrite::{Error, MockBackend};

fn main() -> cowrite::Result<()> {
    let backend = MockBackend::from_corpus(CORPUS_A);
    let tokens = backend.token_ids("the cat sat . the dog ran")?;
    let full = backend.forward_all(&tokens, 3)?;

    let (handle, _) = backend.prefill(&tokens[..3], 3)?;
    println!(
        "prefilled {} tokens (cache entries: {})",
        handle.len(),
        backend.cached_handles()
    );

    let ext = backend.extend(&handle, &tokens[3..], 3)?;
    assert_eq!(ext.rows, full[3..]);
    println!("extended to {} tokens; rows match a full pass", ext.handle.len());

    let (short, row) = backend.truncate(&ext.handle, 5, 3)?;
    assert_eq!(row.entries, full[4].entries);
    println!("truncated back to {} tokens; frontier row matches", short.len());

    let next: Vec<String> = row
        .entries
        .iter()
        .map(|c| format!("{} ({:.3})", c.text, c.logprob))
        .collect();
    println!(
        "top continuations after {:?}: {next:?}",
        backend.detokenize(short.covered_tokens())?
    );

    backend.evict_all();
    match backend.extend(&short, &tokens[5..6], 3) {
        Err(Error::CacheMiss(_)) => println!("after eviction the handle reports a cache miss"),
        other => panic!("expected a cache miss, got {other:?}"),
    }
    Ok(())
}
