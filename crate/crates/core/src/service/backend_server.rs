//! Serves any [`Backend`] over the JSON inference protocol that
//! [`ExternalBackend`](crate::backend::ExternalBackend) speaks.

use std::sync::Arc;

use axum::extract::State;
use axum::routing::{get, post};
use axum::{Json, Router};

use super::http::{ApiError, StrictJson};
use crate::backend::external::{
    AppendTextRequest, AppendTextResponse, BackendInfo, DetokenizeRequest, DetokenizeResponse, ForwardRequest,
    ForwardResponse, RenderChatRequest, RenderChatResponse, TokenizeRequest, TokenizeResponse,
};
use crate::backend::Backend;

type Shared = Arc<dyn Backend>;

pub fn backend_router(backend: Shared) -> Router {
    Router::new()
        .route("/info", get(info))
        .route("/tokenize", post(tokenize))
        .route("/detokenize", post(detokenize))
        .route("/append_text", post(append_text))
        .route("/render_chat", post(render_chat))
        .route("/forward", post(forward))
        .with_state(backend)
}

async fn info(State(b): State<Shared>) -> Json<BackendInfo> {
    Json(BackendInfo {
        model_id: b.model_id().to_string(),
        vocab_size: b.vocab_size(),
        eos: b.eos(),
        context_limit: b.context_limit(),
    })
}

async fn tokenize(
    State(b): State<Shared>,
    StrictJson(req): StrictJson<TokenizeRequest>,
) -> Result<Json<TokenizeResponse>, ApiError> {
    Ok(Json(TokenizeResponse {
        spans: b.tokenize(&req.text)?,
    }))
}

async fn detokenize(
    State(b): State<Shared>,
    StrictJson(req): StrictJson<DetokenizeRequest>,
) -> Result<Json<DetokenizeResponse>, ApiError> {
    Ok(Json(DetokenizeResponse {
        text: b.detokenize(&req.tokens)?,
    }))
}

async fn append_text(
    State(b): State<Shared>,
    StrictJson(req): StrictJson<AppendTextRequest>,
) -> Json<AppendTextResponse> {
    Json(AppendTextResponse {
        text: b.append_text(&req.prefix, &req.suffix),
    })
}

async fn render_chat(
    State(b): State<Shared>,
    StrictJson(req): StrictJson<RenderChatRequest>,
) -> Result<Json<RenderChatResponse>, ApiError> {
    let rendered = b.render_chat(&req.messages)?;
    Ok(Json(RenderChatResponse {
        tokens: rendered.tokens,
        content: rendered.content.into_iter().map(|r| [r.start, r.end]).collect(),
    }))
}

async fn forward(
    State(b): State<Shared>,
    StrictJson(req): StrictJson<ForwardRequest>,
) -> Result<Json<ForwardResponse>, ApiError> {
    let backend = b.clone();
    let rows = tokio::task::spawn_blocking(move || backend.forward_all(&req.tokens, req.top_m))
        .await
        .map_err(|e| ApiError::from(crate::Error::Backend(e.to_string())))??;
    Ok(Json(ForwardResponse { rows }))
}
