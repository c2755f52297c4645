//! Edit-opportunity highlighting.
//!
//! The document is scored inside a pseudo-conversation: the user turn holds
//! the revision prompt followed by the document, and the assistant turn
//! repeats the document unchanged. For each echoed token the engine reads the
//! distribution that predicted it. A token is highlighted when some other
//! token is strictly more likely; ties go to the original. Every token also
//! gets a hover alternative: the best candidate other than the original.

mod render;

use std::sync::Arc;

use serde::Serialize;

pub use render::{intensity, render_ansi, render_html, render_spans, Format, IntensityScale};

use crate::backend::{Backend, CacheHandle, DistributionRow, TokenId, TokenSpan, DEFAULT_TOP_M};
use crate::chat::ChatMessage;
use crate::error::{Error, Result};

/// Separator between the revision prompt and the document in the user turn.
pub const PROMPT_SEPARATOR: &str = "\n\n";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HighlightSpan {
    pub char_start: usize,
    pub char_end: usize,
    pub original_token_text: String,
    pub highlighted: bool,
    pub alternative_text: Option<String>,
    /// Log-probability of the alternative minus that of the original, in nats.
    /// Absent when there is no alternative.
    #[serde(with = "crate::serde_ext::option_float")]
    pub margin: Option<f64>,
    #[serde(with = "crate::serde_ext::float")]
    pub original_logprob: f64,
}

impl HighlightSpan {
    pub fn contains(&self, offset: usize) -> bool {
        (self.char_start..self.char_end).contains(&offset)
    }
}

#[derive(Clone, Serialize)]
pub struct HighlightReport {
    pub document: String,
    pub prompt: String,
    pub spans: Vec<HighlightSpan>,
    pub model_id: String,
    pub revision: u64,
    #[serde(skip)]
    scored: Arc<Scored>,
}

impl std::fmt::Debug for HighlightReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HighlightReport")
            .field("document", &self.document)
            .field("prompt", &self.prompt)
            .field("spans", &self.spans)
            .field("model_id", &self.model_id)
            .field("revision", &self.revision)
            .finish()
    }
}

/// Equality over the visible fields; cached scoring state is ignored.
impl PartialEq for HighlightReport {
    fn eq(&self, other: &Self) -> bool {
        self.document == other.document
            && self.prompt == other.prompt
            && self.spans == other.spans
            && self.model_id == other.model_id
            && self.revision == other.revision
    }
}

/// Rendered sequence and rows behind a report, kept so an edit can reuse the
/// unchanged prefix.
struct Scored {
    tokens: Vec<TokenId>,
    rows: Vec<DistributionRow>,
    handle: Option<CacheHandle>,
    backend: Arc<dyn Backend>,
}

impl Drop for Scored {
    fn drop(&mut self) {
        if let Some(handle) = &self.handle {
            self.backend.release(handle);
        }
    }
}

impl HighlightReport {
    /// The span under `char_offset`. Offsets in whitespace between tokens
    /// resolve to the next token.
    pub fn alternative_at(&self, char_offset: usize) -> Result<&HighlightSpan> {
        let out_of_bounds = || Error::OutOfBounds {
            what: "character offset",
            value: char_offset,
            limit: self.document.len(),
        };
        if char_offset >= self.document.len() {
            return Err(out_of_bounds());
        }
        let i = self.spans.partition_point(|s| s.char_end <= char_offset);
        self.spans.get(i).ok_or_else(out_of_bounds)
    }

    pub fn highlighted(&self) -> impl Iterator<Item = &HighlightSpan> {
        self.spans.iter().filter(|s| s.highlighted)
    }

    /// Length of the rendered pseudo-conversation.
    pub fn rendered_len(&self) -> usize {
        self.scored.tokens.len()
    }
}

pub struct HighlightEngine {
    backend: Arc<dyn Backend>,
    top_m: usize,
}

impl HighlightEngine {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        Self::with_top_m(backend, DEFAULT_TOP_M)
    }

    pub fn with_top_m(backend: Arc<dyn Backend>, top_m: usize) -> Self {
        Self {
            backend,
            top_m: top_m.max(2),
        }
    }

    pub fn backend(&self) -> &Arc<dyn Backend> {
        &self.backend
    }

    pub fn compute_highlights(&self, prompt: &str, document: &str) -> Result<HighlightReport> {
        let (doc_spans, tokens, echo_start) = self.render(prompt, document)?;
        let (handle, rows) = match self.backend.prefill(&tokens, self.top_m) {
            Ok((handle, rows)) => (Some(handle), rows),
            Err(Error::CacheMiss(_)) => (None, self.backend.forward_all(&tokens, self.top_m)?),
            Err(e) => return Err(e),
        };
        self.assemble(prompt, document, doc_spans, tokens, rows, echo_start, handle, 0)
    }

    /// Splices `replacement` into `[char_start, char_end)` and rescores. Rows
    /// for the unchanged rendered prefix are reused; since the document
    /// appears in the user turn first, reuse ends at the first change there.
    pub fn apply_edit(
        &self,
        report: &HighlightReport,
        char_start: usize,
        char_end: usize,
        replacement: &str,
    ) -> Result<HighlightReport> {
        let doc = &report.document;
        if char_start > char_end
            || char_end > doc.len()
            || !doc.is_char_boundary(char_start)
            || !doc.is_char_boundary(char_end)
        {
            return Err(Error::InvalidArgument(format!(
                "invalid edit range {char_start}..{char_end} for a document of {} bytes",
                doc.len()
            )));
        }
        let document = format!("{}{}{}", &doc[..char_start], replacement, &doc[char_end..]);
        let (doc_spans, tokens, echo_start) = self.render(&report.prompt, &document)?;
        let old = &report.scored;
        let keep = old.tokens.iter().zip(&tokens).take_while(|(a, b)| a == b).count();

        let (rows, handle) = match self.rescore(old, &tokens, keep) {
            Ok(done) => done,
            Err(Error::CacheMiss(_)) => {
                let (handle, rows) = self.backend.prefill(&tokens, self.top_m)?;
                (rows, Some(handle))
            }
            Err(e) => return Err(e),
        };
        self.assemble(
            &report.prompt,
            &document,
            doc_spans,
            tokens,
            rows,
            echo_start,
            handle,
            report.revision + 1,
        )
    }

    fn rescore(
        &self,
        old: &Scored,
        tokens: &[TokenId],
        keep: usize,
    ) -> Result<(Vec<DistributionRow>, Option<CacheHandle>)> {
        let old_handle = old.handle.as_ref().ok_or(Error::CacheMiss(0))?;
        if keep == 0 {
            return Err(Error::CacheMiss(old_handle.id()));
        }
        // Rows strictly before `keep - 1` depend only on unchanged tokens,
        // including the token they predict.
        let mut rows: Vec<DistributionRow> = old.rows[..keep - 1].to_vec();
        let (handle, mut frontier) = if keep == old.tokens.len() {
            let mut row = old.rows[keep - 1].clone();
            row.original_logprob = None;
            (old_handle.clone(), row)
        } else {
            self.backend.truncate(old_handle, keep, self.top_m)?
        };
        let handle = if keep == tokens.len() {
            rows.push(frontier);
            handle
        } else {
            let ext = self.backend.extend(&handle, &tokens[keep..], self.top_m);
            if handle != *old_handle {
                self.backend.release(&handle);
            }
            let ext = ext?;
            frontier.original_logprob = Some(ext.token_logprobs[0]);
            rows.push(frontier);
            rows.extend(ext.rows);
            ext.handle
        };
        // The old report keeps its own handle; give the new one a fresh entry.
        let handle = if handle == *old_handle {
            self.backend.truncate(&handle, handle.len(), self.top_m)?.0
        } else {
            handle
        };
        Ok((rows, Some(handle)))
    }

    fn render(&self, prompt: &str, document: &str) -> Result<(Vec<TokenSpan>, Vec<TokenId>, usize)> {
        let doc_spans = self.backend.tokenize(document)?;
        if doc_spans.is_empty() {
            return Err(Error::EmptyDocument);
        }
        let user = format!("{prompt}{PROMPT_SEPARATOR}{document}");
        let rendered = self
            .backend
            .render_chat(&[ChatMessage::user(user), ChatMessage::assistant(document)])?;
        let echo = rendered.content[1].clone();
        if echo.len() != doc_spans.len() || echo.start == 0 {
            return Err(Error::Alignment {
                echo: echo.len(),
                document: doc_spans.len(),
            });
        }
        Ok((doc_spans, rendered.tokens, echo.start))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        &self,
        prompt: &str,
        document: &str,
        doc_spans: Vec<TokenSpan>,
        tokens: Vec<TokenId>,
        rows: Vec<DistributionRow>,
        echo_start: usize,
        handle: Option<CacheHandle>,
        revision: u64,
    ) -> Result<HighlightReport> {
        let spans = doc_spans
            .into_iter()
            .enumerate()
            .map(|(i, span)| {
                let position = echo_start + i;
                score_span(span, tokens[position], &rows[position - 1])
            })
            .collect();
        Ok(HighlightReport {
            document: document.to_string(),
            prompt: prompt.to_string(),
            spans,
            model_id: self.backend.model_id().to_string(),
            revision,
            scored: Arc::new(Scored {
                tokens,
                rows,
                handle,
                backend: self.backend.clone(),
            }),
        })
    }
}

/// Decides one span from the row that predicted its token.
fn score_span(span: TokenSpan, original: TokenId, row: &DistributionRow) -> HighlightSpan {
    let original_logprob = row.original_logprob.unwrap_or(f64::NEG_INFINITY);
    let best = row.entries.iter().find(|c| c.token != original);
    let margin = best.map(|c| c.logprob - original_logprob);
    HighlightSpan {
        char_start: span.char_start,
        char_end: span.char_end,
        original_token_text: span.text,
        highlighted: margin.is_some_and(|m| m > 0.0),
        alternative_text: best.map(|c| c.text.to_string()),
        margin,
        original_logprob,
    }
}
