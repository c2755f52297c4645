#![allow(dead_code)]

#[rustfmt::skip]
pub mod oracle;

use std::sync::Arc;

use cowrite::backend::{Backend, MockBackend};
use cowrite::samples::CORPUS_A;
use rand::seq::SliceRandom;
use rand::Rng;

/// Words drawn for random texts: the corpus vocabulary plus two unseen words.
pub const WORDS: [&str; 8] = ["the", "cat", "sat", ".", "ran", "dog", "zebra", "hat"];

pub fn mock() -> Arc<MockBackend> {
    Arc::new(MockBackend::from_corpus(CORPUS_A))
}

pub fn dyn_mock() -> Arc<dyn Backend> {
    mock()
}

pub fn random_words(rng: &mut impl Rng, min: usize, max: usize) -> Vec<&'static str> {
    let n = rng.gen_range(min..=max);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect()
}
