//! Bundled sample texts.

/// Three short sentences used as the reference corpus for the mock backend.
pub const CORPUS_A: &str = "the cat sat . the cat ran . the dog sat .";

/// Prompt and document of the reference highlighting fixture.
pub const FIXTURE_PROMPT: &str = "edit";
pub const FIXTURE_DOCUMENT: &str = "the dog sat .";

/// A longer paragraph and revision instruction for end-to-end smoke runs.
pub const SIX_HATS_DOCUMENT: &str = include_str!("../fixtures/six_hats.txt");
pub const SIX_HATS_PROMPT: &str = include_str!("../fixtures/six_hats_prompt.txt");
