//! Language-model abstraction used by both engines.
//!
//! A [`Backend`] tokenizes text with byte offsets, renders chat transcripts
//! into token sequences, scores every position of a sequence, and extends
//! sequences incrementally through [`CacheHandle`]s. The [`MockBackend`] is a
//! deterministic bigram model whose outputs can be derived by hand.

mod cache;
pub mod external;
mod mock;

use std::cmp::Ordering;
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use cache::{PrefixCache, DEFAULT_CACHE_CAPACITY};
pub use external::ExternalBackend;
pub use mock::{MockBackend, MockConfig};

use crate::chat::ChatMessage;
use crate::error::Result;

/// Rows keep at most this many candidates unless a caller asks otherwise.
pub const DEFAULT_TOP_M: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u64);

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A token together with the byte range of the source text it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSpan {
    pub token: TokenId,
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub token: TokenId,
    pub logprob: f64,
    pub text: Arc<str>,
}

/// Sort order shared by every ranked list: higher probability first, then
/// display text ascending, then token id ascending.
pub fn rank_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.logprob
        .partial_cmp(&a.logprob)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.text.cmp(&b.text))
        .then_with(|| a.token.cmp(&b.token))
}

/// Next-token distribution computed at `position`, truncated to the top
/// candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub position: usize,
    pub entries: Vec<Candidate>,
    /// Exact log-probability of the token actually found at `position + 1`,
    /// whether or not it made the top list. `None` for the final position.
    #[serde(with = "crate::serde_ext::option_float")]
    pub original_logprob: Option<f64>,
}

impl DistributionRow {
    pub fn argmax(&self) -> Option<&Candidate> {
        self.entries.first()
    }
}

/// A rendered chat: the full token sequence plus, for every message, the range
/// of tokens holding its content (markers excluded).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedChat {
    pub tokens: Vec<TokenId>,
    pub content: Vec<Range<usize>>,
}

/// Reference to backend state covering an exact token prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheHandle {
    id: u64,
    covered: Arc<[TokenId]>,
}

impl CacheHandle {
    pub(crate) fn new(id: u64, covered: Arc<[TokenId]>) -> Self {
        Self { id, covered }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn covered_tokens(&self) -> &[TokenId] {
        &self.covered
    }

    pub fn len(&self) -> usize {
        self.covered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covered.is_empty()
    }
}

/// Result of extending a cached prefix.
#[derive(Debug, Clone)]
pub struct Extension {
    pub handle: CacheHandle,
    /// Exact log-probability of each appended token given its left context.
    pub token_logprobs: Vec<f64>,
    /// One row per appended position. The last row is the new frontier.
    pub rows: Vec<DistributionRow>,
}

impl Extension {
    pub fn row(&self) -> &DistributionRow {
        self.rows.last().expect("extension appends at least one token")
    }
}

pub trait Backend: Send + Sync {
    fn model_id(&self) -> &str;

    fn vocab_size(&self) -> u64;

    fn context_limit(&self) -> usize;

    fn eos(&self) -> TokenId;

    fn tokenize(&self, text: &str) -> Result<Vec<TokenSpan>>;

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String>;

    /// Joins committed text with newly typed text the way the tokenizer
    /// expects to see it.
    fn append_text(&self, prefix: &str, suffix: &str) -> String {
        format!("{prefix}{suffix}")
    }

    fn render_chat(&self, messages: &[ChatMessage]) -> Result<RenderedChat>;

    fn forward_all(&self, tokens: &[TokenId], top_m: usize) -> Result<Vec<DistributionRow>>;

    /// Full pass that also leaves a cache entry behind.
    fn prefill(&self, tokens: &[TokenId], top_m: usize) -> Result<(CacheHandle, Vec<DistributionRow>)>;

    fn extend(&self, handle: &CacheHandle, new_tokens: &[TokenId], top_m: usize) -> Result<Extension>;

    /// Rolls a handle back to its first `len` tokens and returns the frontier
    /// row at the new end.
    fn truncate(&self, handle: &CacheHandle, len: usize, top_m: usize) -> Result<(CacheHandle, DistributionRow)>;

    fn release(&self, handle: &CacheHandle);

    fn evict_all(&self);

    fn token_ids(&self, text: &str) -> Result<Vec<TokenId>> {
        Ok(self.tokenize(text)?.into_iter().map(|s| s.token).collect())
    }
}

/// Greedily continues after `seed`: repeatedly appends the argmax token and
/// returns up to `n` tokens, stopping before end-of-sequence.
pub fn greedy_continue(
    backend: &dyn Backend,
    handle: &CacheHandle,
    seed: TokenId,
    n: usize,
    top_m: usize,
) -> Result<Vec<TokenId>> {
    let eos = backend.eos();
    let mut out = Vec::new();
    if n == 0 || seed == eos {
        return Ok(out);
    }
    let mut ext = backend.extend(handle, &[seed], top_m.max(1))?;
    loop {
        let next = match ext.row().argmax() {
            Some(c) if c.token != eos => c.token,
            _ => break,
        };
        out.push(next);
        if out.len() == n {
            break;
        }
        let step = backend.extend(&ext.handle, &[next], top_m.max(1));
        backend.release(&ext.handle);
        ext = step?;
    }
    backend.release(&ext.handle);
    Ok(out)
}

pub(crate) fn check_top_m(top_m: usize) -> Result<()> {
    if top_m == 0 {
        return Err(crate::Error::InvalidArgument("top_m must be at least 1".into()));
    }
    Ok(())
}
