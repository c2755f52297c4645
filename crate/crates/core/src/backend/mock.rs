//! Deterministic bigram backend.
//!
//! The corpus is read as one `<bos> w1 … wn <eos>` sequence. Rows come from
//! maximum-likelihood bigram counts; a predecessor that never precedes
//! anything in the corpus (chat markers, unseen words, `<eos>`) backs off to
//! the unigram distribution of predicted tokens. There is no smoothing, so
//! candidate lists only ever hold tokens with a nonzero count.
//!
//! The vocabulary is open: corpus words get small dense ids in sorted order,
//! and any other word gets a stable id derived from a hash of its text, so
//! identical inputs tokenize identically in every process.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

use super::cache::{PrefixCache, DEFAULT_CACHE_CAPACITY};
use super::{
    check_top_m, rank_order, Backend, CacheHandle, Candidate, DistributionRow, Extension, RenderedChat, TokenId,
    TokenSpan,
};
use crate::chat::{validate_conversation, ChatMessage, Role};
use crate::error::{Error, Result};

pub const BOS: TokenId = TokenId(0);
pub const EOS: TokenId = TokenId(1);
pub const USER: TokenId = TokenId(2);
pub const ASSISTANT: TokenId = TokenId(3);
const SPECIALS: [&str; 4] = ["<bos>", "<eos>", "<user>", "<assistant>"];

// Out-of-corpus ids live in [2^52, 2^53), which keeps them exact in
// JavaScript numbers.
const OOV_BASE: u64 = 1 << 52;
const OOV_MASK: u64 = OOV_BASE - 1;

#[derive(Debug, Clone)]
pub struct MockConfig {
    pub context_limit: usize,
    pub cache_capacity: usize,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            context_limit: 4096,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
        }
    }
}

struct Successors {
    total: u64,
    counts: HashMap<TokenId, u64>,
    ranked: Vec<Candidate>,
}

pub struct MockBackend {
    model_id: String,
    config: MockConfig,
    texts: Vec<Arc<str>>,
    word_ids: HashMap<Arc<str>, TokenId>,
    oov: RwLock<HashMap<TokenId, Arc<str>>>,
    unigram: Successors,
    bigram: HashMap<TokenId, Successors>,
    cache: PrefixCache<TokenId>,
}

impl MockBackend {
    pub fn new(corpus: &str, config: MockConfig) -> Self {
        let mut words: Vec<&str> = corpus.split_whitespace().collect();
        let sequence_words = words.clone();
        words.sort_unstable();
        words.dedup();

        let mut texts: Vec<Arc<str>> = SPECIALS.iter().map(|s| Arc::from(*s)).collect();
        let mut word_ids = HashMap::new();
        for word in words {
            let id = TokenId(texts.len() as u64);
            let text: Arc<str> = Arc::from(word);
            texts.push(text.clone());
            word_ids.insert(text, id);
        }

        let mut sequence = Vec::with_capacity(sequence_words.len() + 2);
        sequence.push(BOS);
        sequence.extend(sequence_words.iter().map(|w| word_ids[*w]));
        sequence.push(EOS);

        let mut unigram_counts: HashMap<TokenId, u64> = HashMap::new();
        let mut bigram_counts: HashMap<TokenId, HashMap<TokenId, u64>> = HashMap::new();
        for pair in sequence.windows(2) {
            *unigram_counts.entry(pair[1]).or_default() += 1;
            *bigram_counts.entry(pair[0]).or_default().entry(pair[1]).or_default() += 1;
        }

        let rank = |counts: HashMap<TokenId, u64>| -> Successors {
            let total: u64 = counts.values().sum();
            let mut ranked: Vec<Candidate> = counts
                .iter()
                .map(|(&token, &count)| Candidate {
                    token,
                    logprob: (count as f64 / total as f64).ln(),
                    text: texts[token.0 as usize].clone(),
                })
                .collect();
            ranked.sort_by(rank_order);
            Successors { total, counts, ranked }
        };

        let unigram = rank(unigram_counts);
        let bigram = bigram_counts.into_iter().map(|(prev, c)| (prev, rank(c))).collect();

        Self {
            model_id: format!("mock-bigram-{:016x}", fnv1a(sequence_words.join(" ").as_bytes())),
            cache: PrefixCache::new(config.cache_capacity),
            config,
            texts,
            word_ids,
            oov: RwLock::new(HashMap::new()),
            unigram,
            bigram,
        }
    }

    pub fn from_corpus(corpus: &str) -> Self {
        Self::new(corpus, MockConfig::default())
    }

    pub fn from_path(path: impl AsRef<Path>, config: MockConfig) -> Result<Self> {
        let path = path.as_ref();
        let corpus = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Ok(Self::new(&corpus, config))
    }

    /// Full ranked successor distribution for `prev`, before any top-m
    /// truncation.
    pub fn full_distribution(&self, prev: TokenId) -> &[Candidate] {
        &self.successors(prev).ranked
    }

    /// Exact log-probability of `next` following `prev`; `-inf` for a zero count.
    pub fn logprob(&self, prev: TokenId, next: TokenId) -> f64 {
        let s = self.successors(prev);
        let count = s.counts.get(&next).copied().unwrap_or(0);
        if count == 0 {
            f64::NEG_INFINITY
        } else {
            (count as f64 / s.total as f64).ln()
        }
    }

    pub fn lookup(&self, word: &str) -> Option<TokenId> {
        self.word_ids.get(word).copied()
    }

    pub fn cached_handles(&self) -> usize {
        self.cache.len()
    }

    fn successors(&self, prev: TokenId) -> &Successors {
        self.bigram.get(&prev).unwrap_or(&self.unigram)
    }

    fn word_id(&self, word: &str) -> Result<TokenId> {
        if let Some(&id) = self.word_ids.get(word) {
            return Ok(id);
        }
        let id = TokenId(OOV_BASE | (fnv1a(word.as_bytes()) & OOV_MASK));
        if let Some(existing) = self.oov.read().unwrap().get(&id) {
            return if &**existing == word {
                Ok(id)
            } else {
                Err(Error::Backend(format!(
                    "token id collision between {existing:?} and {word:?}"
                )))
            };
        }
        let mut oov = self.oov.write().unwrap();
        let existing = oov.entry(id).or_insert_with(|| Arc::from(word));
        if &**existing == word {
            Ok(id)
        } else {
            Err(Error::Backend(format!(
                "token id collision between {existing:?} and {word:?}"
            )))
        }
    }

    fn text_of(&self, id: TokenId) -> Result<Arc<str>> {
        if let Some(text) = self.texts.get(id.0 as usize) {
            return Ok(text.clone());
        }
        self.oov
            .read()
            .unwrap()
            .get(&id)
            .cloned()
            .ok_or(Error::InvalidToken(id))
    }

    /// Every id in the unseen-word range is a valid token, even one this
    /// process has not tokenized yet; scoring never needs its text.
    fn check_tokens(&self, tokens: &[TokenId]) -> Result<()> {
        for &t in tokens {
            let known = (t.0 as usize) < self.texts.len() || (OOV_BASE..OOV_BASE << 1).contains(&t.0);
            if !known {
                return Err(Error::InvalidToken(t));
            }
        }
        Ok(())
    }

    fn row(&self, position: usize, prev: TokenId, next: Option<TokenId>, top_m: usize) -> DistributionRow {
        DistributionRow {
            position,
            entries: self.successors(prev).ranked.iter().take(top_m).cloned().collect(),
            original_logprob: next.map(|n| self.logprob(prev, n)),
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len > self.config.context_limit {
            return Err(Error::ContextOverflow {
                len,
                limit: self.config.context_limit,
            });
        }
        Ok(())
    }
}

impl Backend for MockBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn vocab_size(&self) -> u64 {
        OOV_BASE << 1
    }

    fn context_limit(&self) -> usize {
        self.config.context_limit
    }

    fn eos(&self) -> TokenId {
        EOS
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenSpan>> {
        let mut spans = Vec::new();
        let mut start = None;
        for (i, ch) in text.char_indices().chain(std::iter::once((text.len(), ' '))) {
            match (start, ch.is_whitespace()) {
                (None, false) => start = Some(i),
                (Some(s), true) => {
                    let word = &text[s..i];
                    spans.push(TokenSpan {
                        token: self.word_id(word)?,
                        text: word.to_string(),
                        char_start: s,
                        char_end: i,
                    });
                    start = None;
                }
                _ => {}
            }
        }
        Ok(spans)
    }

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String> {
        let mut out = String::new();
        for (i, &t) in tokens.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&self.text_of(t)?);
        }
        Ok(out)
    }

    fn append_text(&self, prefix: &str, suffix: &str) -> String {
        if prefix.trim().is_empty() {
            suffix.to_string()
        } else if suffix.trim().is_empty() {
            prefix.to_string()
        } else {
            format!("{prefix} {suffix}")
        }
    }

    fn render_chat(&self, messages: &[ChatMessage]) -> Result<RenderedChat> {
        validate_conversation(messages)?;
        let mut tokens = Vec::new();
        let mut content = Vec::with_capacity(messages.len());
        for message in messages {
            tokens.push(match message.role {
                Role::User => USER,
                Role::Assistant => ASSISTANT,
            });
            let start = tokens.len();
            tokens.extend(self.token_ids(&message.content)?);
            content.push(start..tokens.len());
        }
        Ok(RenderedChat { tokens, content })
    }

    fn forward_all(&self, tokens: &[TokenId], top_m: usize) -> Result<Vec<DistributionRow>> {
        check_top_m(top_m)?;
        if tokens.is_empty() {
            return Err(Error::InvalidArgument("cannot score an empty sequence".into()));
        }
        self.check_len(tokens.len())?;
        self.check_tokens(tokens)?;
        Ok((0..tokens.len())
            .map(|i| self.row(i, tokens[i], tokens.get(i + 1).copied(), top_m))
            .collect())
    }

    fn prefill(&self, tokens: &[TokenId], top_m: usize) -> Result<(CacheHandle, Vec<DistributionRow>)> {
        let rows = self.forward_all(tokens, top_m)?;
        let handle = self.cache.insert(tokens.into(), *tokens.last().unwrap());
        Ok((handle, rows))
    }

    fn extend(&self, handle: &CacheHandle, new_tokens: &[TokenId], top_m: usize) -> Result<Extension> {
        check_top_m(top_m)?;
        if new_tokens.is_empty() {
            return Err(Error::InvalidArgument("extend needs at least one token".into()));
        }
        self.check_len(handle.len() + new_tokens.len())?;
        self.check_tokens(new_tokens)?;
        let mut prev = self.cache.get(handle)?;

        let base = handle.len();
        let mut token_logprobs = Vec::with_capacity(new_tokens.len());
        let mut rows = Vec::with_capacity(new_tokens.len());
        for (j, &token) in new_tokens.iter().enumerate() {
            token_logprobs.push(self.logprob(prev, token));
            rows.push(self.row(base + j, token, new_tokens.get(j + 1).copied(), top_m));
            prev = token;
        }

        let covered: Arc<[TokenId]> = handle.covered_tokens().iter().chain(new_tokens).copied().collect();
        let handle = self.cache.insert(covered, prev);
        Ok(Extension {
            handle,
            token_logprobs,
            rows,
        })
    }

    fn truncate(&self, handle: &CacheHandle, len: usize, top_m: usize) -> Result<(CacheHandle, DistributionRow)> {
        check_top_m(top_m)?;
        self.cache.get(handle)?;
        if len == 0 || len > handle.len() {
            return Err(Error::OutOfBounds {
                what: "truncation length",
                value: len,
                limit: handle.len(),
            });
        }
        let covered: Arc<[TokenId]> = handle.covered_tokens()[..len].into();
        let last = covered[len - 1];
        let row = self.row(len - 1, last, None, top_m);
        Ok((self.cache.insert(covered, last), row))
    }

    fn release(&self, handle: &CacheHandle) {
        self.cache.remove(handle);
    }

    fn evict_all(&self) {
        self.cache.clear();
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |hash, &b| {
        (hash ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}
