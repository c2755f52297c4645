//! Adapter for an out-of-process inference server.
//!
//! The server exposes JSON endpoints (see `docs/backend-protocol.md`):
//! `GET /info`, `POST /tokenize`, `POST /detokenize`, `POST /append_text`,
//! `POST /render_chat` and `POST /forward`. The server keeps no per-client state, so cache
//! handles only track which prefixes are live and every extension is scored
//! with a full pass over the covered sequence.

use std::sync::Arc;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::cache::{PrefixCache, DEFAULT_CACHE_CAPACITY};
use super::{check_top_m, Backend, CacheHandle, DistributionRow, Extension, RenderedChat, TokenId, TokenSpan};
use crate::chat::ChatMessage;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendInfo {
    pub model_id: String,
    pub vocab_size: u64,
    pub eos: TokenId,
    pub context_limit: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenizeRequest {
    pub text: String,
}

#[derive(Serialize, Deserialize)]
pub struct TokenizeResponse {
    pub spans: Vec<TokenSpan>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetokenizeRequest {
    pub tokens: Vec<TokenId>,
}

#[derive(Serialize, Deserialize)]
pub struct DetokenizeResponse {
    pub text: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppendTextRequest {
    pub prefix: String,
    pub suffix: String,
}

#[derive(Serialize, Deserialize)]
pub struct AppendTextResponse {
    pub text: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderChatRequest {
    pub messages: Vec<ChatMessage>,
}

#[derive(Serialize, Deserialize)]
pub struct RenderChatResponse {
    pub tokens: Vec<TokenId>,
    pub content: Vec<[usize; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardRequest {
    pub tokens: Vec<TokenId>,
    pub top_m: usize,
}

#[derive(Serialize, Deserialize)]
pub struct ForwardResponse {
    pub rows: Vec<DistributionRow>,
}

pub struct ExternalBackend {
    base_url: String,
    agent: ureq::Agent,
    info: BackendInfo,
    cache: PrefixCache<()>,
}

impl ExternalBackend {
    /// Connects to `base_url` and fetches the model description.
    pub fn connect(base_url: &str, timeout: Duration) -> Result<Self> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        let base_url = base_url.trim_end_matches('/').to_string();
        let info = agent
            .get(&format!("{base_url}/info"))
            .call()
            .map_err(|e| Error::Backend(format!("GET {base_url}/info: {e}")))?
            .body_mut()
            .read_json::<BackendInfo>()
            .map_err(|e| Error::Backend(format!("GET {base_url}/info: {e}")))?;
        Ok(Self {
            base_url,
            agent,
            info,
            cache: PrefixCache::new(DEFAULT_CACHE_CAPACITY),
        })
    }

    fn post<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R> {
        let url = format!("{}/{path}", self.base_url);
        self.agent
            .post(&url)
            .send_json(body)
            .map_err(|e| Error::Backend(format!("POST {url}: {e}")))?
            .body_mut()
            .read_json::<R>()
            .map_err(|e| Error::Backend(format!("POST {url}: {e}")))
    }

    fn forward(&self, tokens: &[TokenId], top_m: usize) -> Result<Vec<DistributionRow>> {
        if tokens.len() > self.info.context_limit {
            return Err(Error::ContextOverflow {
                len: tokens.len(),
                limit: self.info.context_limit,
            });
        }
        let response: ForwardResponse = self.post(
            "forward",
            &ForwardRequest {
                tokens: tokens.to_vec(),
                top_m,
            },
        )?;
        if response.rows.len() != tokens.len() {
            return Err(Error::Backend(format!(
                "server returned {} rows for {} tokens",
                response.rows.len(),
                tokens.len()
            )));
        }
        Ok(response.rows)
    }
}

impl Backend for ExternalBackend {
    fn model_id(&self) -> &str {
        &self.info.model_id
    }

    fn vocab_size(&self) -> u64 {
        self.info.vocab_size
    }

    fn context_limit(&self) -> usize {
        self.info.context_limit
    }

    fn eos(&self) -> TokenId {
        self.info.eos
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenSpan>> {
        let response: TokenizeResponse = self.post("tokenize", &TokenizeRequest { text: text.into() })?;
        Ok(response.spans)
    }

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String> {
        let response: DetokenizeResponse = self.post(
            "detokenize",
            &DetokenizeRequest {
                tokens: tokens.to_vec(),
            },
        )?;
        Ok(response.text)
    }

    fn append_text(&self, prefix: &str, suffix: &str) -> String {
        let request = AppendTextRequest {
            prefix: prefix.into(),
            suffix: suffix.into(),
        };
        match self.post::<_, AppendTextResponse>("append_text", &request) {
            Ok(response) => response.text,
            Err(e) => {
                tracing::warn!(error = %e, "append_text failed; concatenating");
                format!("{prefix}{suffix}")
            }
        }
    }

    fn render_chat(&self, messages: &[ChatMessage]) -> Result<RenderedChat> {
        crate::chat::validate_conversation(messages)?;
        let response: RenderChatResponse = self.post(
            "render_chat",
            &RenderChatRequest {
                messages: messages.to_vec(),
            },
        )?;
        Ok(RenderedChat {
            tokens: response.tokens,
            content: response.content.into_iter().map(|[s, e]| s..e).collect(),
        })
    }

    fn forward_all(&self, tokens: &[TokenId], top_m: usize) -> Result<Vec<DistributionRow>> {
        check_top_m(top_m)?;
        if tokens.is_empty() {
            return Err(Error::InvalidArgument("cannot score an empty sequence".into()));
        }
        self.forward(tokens, top_m)
    }

    fn prefill(&self, tokens: &[TokenId], top_m: usize) -> Result<(CacheHandle, Vec<DistributionRow>)> {
        let rows = self.forward_all(tokens, top_m)?;
        Ok((self.cache.insert(tokens.into(), ()), rows))
    }

    fn extend(&self, handle: &CacheHandle, new_tokens: &[TokenId], top_m: usize) -> Result<Extension> {
        check_top_m(top_m)?;
        if new_tokens.is_empty() {
            return Err(Error::InvalidArgument("extend needs at least one token".into()));
        }
        self.cache.get(handle)?;
        let covered: Arc<[TokenId]> = handle.covered_tokens().iter().chain(new_tokens).copied().collect();
        let mut rows = self.forward(&covered, top_m)?;
        let base = handle.len();
        let token_logprobs = (base..covered.len())
            .map(|p| {
                p.checked_sub(1)
                    .and_then(|q| rows[q].original_logprob)
                    .ok_or_else(|| Error::Backend("missing log-probability for appended token".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let rows = rows.split_off(base);
        Ok(Extension {
            handle: self.cache.insert(covered, ()),
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
        let mut row = self.forward(&covered, top_m)?.pop().expect("non-empty");
        row.original_logprob = None;
        Ok((self.cache.insert(covered, ()), row))
    }

    fn release(&self, handle: &CacheHandle) {
        self.cache.remove(handle);
    }

    fn evict_all(&self) {
        self.cache.clear();
    }
}
