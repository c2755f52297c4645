//! Brute-force reference: recounts corpus strings on every query; shares no code with the library.

use std::collections::BTreeMap;

pub struct Oracle(Vec<String>);

impl Oracle {
    pub fn new(corpus: &str) -> Self {
        Self(format!("<bos> {corpus} <eos>").split_whitespace().map(String::from).collect())
    }
    /// Ranked `(text, ln p)` successors of `prev`, unigram when `prev` never precedes anything.
    pub fn row(&self, prev: &str) -> Vec<(String, f64)> {
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        self.0.windows(2).filter(|p| p[0] == prev).for_each(|p| *counts.entry(&p[1]).or_default() += 1);
        if counts.is_empty() { self.0[1..].iter().for_each(|w| *counts.entry(w).or_default() += 1); }
        let total: u64 = counts.values().sum();
        let mut row: Vec<(u64, &str)> = counts.into_iter().map(|(w, c)| (c, w)).collect();
        row.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
        row.into_iter().map(|(c, w)| (w.to_string(), (c as f64 / total as f64).ln())).collect()
    }
    pub fn logprob(&self, prev: &str, next: &str) -> f64 {
        self.row(prev).into_iter().find(|(w, _)| w == next).map_or(f64::NEG_INFINITY, |(_, lp)| lp)
    }
    /// Suggestion displays after `prev`: head plus greedy preview, deduplicated.
    pub fn suggestions(&self, prev: &str, k: usize, phrase_tokens: usize) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (head, _) in self.row(prev) {
            if out.len() == k { break; }
            let mut phrase = vec![head.clone()];
            while head != "<eos>" && phrase.len() < phrase_tokens {
                let (next, _) = self.row(phrase.last().unwrap()).remove(0);
                if next == "<eos>" { break; }
                phrase.push(next);
            }
            let display = if head == "<eos>" { "⏎ done".to_string() } else { phrase.join(" ") };
            if !out.contains(&display) { out.push(display); }
        }
        out
    }
    /// Per document word: (highlighted, alternative, margin).
    pub fn highlights(&self, document: &[&str]) -> Vec<(bool, Option<String>, Option<f64>)> {
        std::iter::once("<assistant>").chain(document.iter().copied()).zip(document).map(|(prev, word)| {
            let original = self.logprob(prev, word);
            match self.row(prev).into_iter().find(|(w, _)| w != word) {
                Some((alt, lp)) => (lp > original, Some(alt), Some(lp - original)),
                None => (false, None, None),
            }
        }).collect()
    }
}
