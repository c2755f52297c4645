//! HTTP service exposing the composer and the highlighter.
//!
//! | route | body | response |
//! |---|---|---|
//! | `POST /api/v1/session` | [`CreateSessionRequest`] | [`SessionResponse`] |
//! | `POST /api/v1/session/{id}/action` | [`ActionRequest`] | [`SessionResponse`] |
//! | `GET /api/v1/session/{id}/log` | | [`LogView`] |
//! | `POST /api/v1/highlight` | [`HighlightRequest`] | [`HighlightReport`] |
//! | `POST /api/v1/highlight/edit` | [`EditRequest`] | [`HighlightReport`] |
//! | `GET /healthz` | | [`Health`] |
//!
//! Errors are [`ErrorBody`] values. [`backend_router`] serves a model
//! backend itself over the inference protocol.

mod backend_server;
mod config;
mod http;
mod state;

use std::future::Future;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

pub use backend_server::backend_router;
pub use config::{BackendKind, ServiceConfig, ENV_OVERRIDES};
pub use http::{ApiError, ErrorBody, ErrorDetail, StrictJson};
pub use state::{AppState, LogView};

use crate::backend::Backend;
use crate::chat::{ChatMessage, Conversation};
use crate::error::{Error, Result};
use crate::feedback::event::EditApplied;
use crate::feedback::{AmplificationReport, EventLog};
use crate::highlight::{HighlightEngine, HighlightReport};
use crate::predictive::{Session, SessionConfig, Suggestion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    pub messages: Conversation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phrase_tokens: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Accept,
    Type,
    Undo,
    Finalize,
}

/// One composer action. `accept` needs `rank` and the `revision` of the set
/// it was chosen from; `type` needs `text`; `undo` needs `n`. A `revision`
/// on any other op must also match the current one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRequest {
    pub op: Op,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revision: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResponse {
    pub session_id: String,
    pub composed_text: String,
    pub suggestions: Vec<Suggestion>,
    pub revision: u64,
    pub finalized: bool,
    /// The assistant message, once finalized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<ChatMessage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<AmplificationReport>,
}

impl SessionResponse {
    fn of(session: &Session, suggestions: Vec<Suggestion>) -> Self {
        let outcome = session.outcome();
        Self {
            session_id: session.id().to_string(),
            composed_text: session.composed_text().to_string(),
            suggestions,
            revision: session.revision(),
            finalized: session.is_finalized(),
            message: outcome.map(|(m, _)| m.clone()),
            metrics: outcome.map(|(_, r)| r.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HighlightRequest {
    #[serde(default)]
    pub prompt: String,
    pub document: String,
}

/// Replaces `[char_start, char_end)` of the report identified by
/// `(prompt, document, revision)` with `replacement`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditRequest {
    #[serde(default)]
    pub prompt: String,
    pub document: String,
    #[serde(default)]
    pub revision: u64,
    pub char_start: usize,
    pub char_end: usize,
    pub replacement: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_id: Option<String>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/api/v1/session", post(create_session))
        .route("/api/v1/session/{id}/action", post(session_action))
        .route("/api/v1/session/{id}/log", get(session_log))
        .route("/api/v1/highlight", post(highlight))
        .route("/api/v1/highlight/edit", post(highlight_edit))
        .with_state(state)
}

async fn healthz(State(state): State<AppState>) -> Response {
    match state.backend() {
        Some(backend) => Json(Health {
            status: "ok".into(),
            model_id: Some(backend.model_id().to_string()),
        })
        .into_response(),
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(Health {
                status: "loading".into(),
                model_id: None,
            }),
        )
            .into_response(),
    }
}

fn ready(state: &AppState) -> Result<Arc<dyn Backend>, ApiError> {
    state.backend().ok_or_else(ApiError::not_ready)
}

/// Runs engine work off the async workers; backends may block on I/O.
async fn blocking<T: Send + 'static>(
    work: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(work)
        .await
        .map_err(|e| ApiError::from(Error::Backend(format!("worker failed: {e}"))))?
}

async fn create_session(
    State(state): State<AppState>,
    StrictJson(req): StrictJson<CreateSessionRequest>,
) -> Result<Json<SessionResponse>, ApiError> {
    let backend = ready(&state)?;
    let config = SessionConfig {
        k: req.k.unwrap_or(state.config().default_k),
        phrase_tokens: req.phrase_tokens.unwrap_or(state.config().default_phrase_tokens),
        top_m: state.config().top_m,
    };
    blocking(move || {
        let id = uuid::Uuid::new_v4().to_string();
        let log = state.new_log(&id, backend.model_id());
        let (session, suggestions) = Session::start_with_log(backend, req.messages, config, log)?;
        let response = SessionResponse::of(&session, suggestions);
        state.insert(session);
        Ok(Json(response))
    })
    .await
}

async fn session_action(
    State(state): State<AppState>,
    Path(id): Path<String>,
    StrictJson(req): StrictJson<ActionRequest>,
) -> Result<Json<SessionResponse>, ApiError> {
    ready(&state)?;
    let slot = state
        .slot(&id)
        .ok_or_else(|| ApiError::not_found(format!("no live session {id}")))?;
    blocking(move || {
        let mut session = slot.session.lock().unwrap();
        slot.touch();
        if session.is_finalized() {
            return Err(Error::Finalized.into());
        }
        if req.op != Op::Accept {
            if let Some(revision) = req.revision.filter(|&r| r != session.revision()) {
                return Err(ApiError::stale(format!(
                    "revision {revision} is not the current revision {}",
                    session.revision()
                )));
            }
        }
        let suggestions = match req.op {
            Op::Accept => {
                let rank = req.rank.ok_or_else(|| ApiError::bad_request("accept needs a rank"))?;
                let revision = req
                    .revision
                    .ok_or_else(|| ApiError::bad_request("accept needs the revision it was shown at"))?;
                session.accept_at(revision, rank)?
            }
            Op::Type => {
                let text = req
                    .text
                    .as_deref()
                    .ok_or_else(|| ApiError::bad_request("type needs text"))?;
                session.type_text(text)?
            }
            Op::Undo => {
                let n = req.n.ok_or_else(|| ApiError::bad_request("undo needs n"))?;
                session.undo(n)?
            }
            Op::Finalize => {
                session.finalize()?;
                Vec::new()
            }
        };
        Ok(Json(SessionResponse::of(&session, suggestions)))
    })
    .await
}

async fn session_log(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<LogView>, ApiError> {
    if let Some(slot) = state.slot(&id) {
        let session = slot.session.lock().unwrap();
        return Ok(Json(LogView::of(session.log())));
    }
    if let Some(view) = state.retired_log(&id) {
        return Ok(Json(view));
    }
    // Only ids this service could have issued map to files.
    let known = uuid::Uuid::parse_str(&id).is_ok();
    match state.log_path(&id).filter(|p| known && p.is_file()) {
        Some(path) => {
            let log = blocking(move || Ok(EventLog::read(path)?)).await?;
            Ok(Json(LogView::of(&log)))
        }
        None => Err(ApiError::not_found(format!("no session {id}"))),
    }
}

async fn highlight(
    State(state): State<AppState>,
    StrictJson(req): StrictJson<HighlightRequest>,
) -> Result<Json<HighlightReport>, ApiError> {
    let backend = ready(&state)?;
    blocking(move || {
        let engine = HighlightEngine::with_top_m(backend, state.config().top_m);
        let report = engine.compute_highlights(&req.prompt, &req.document)?;
        state.remember_report(&report, None)?;
        Ok(Json(report))
    })
    .await
}

async fn highlight_edit(
    State(state): State<AppState>,
    StrictJson(req): StrictJson<EditRequest>,
) -> Result<Json<HighlightReport>, ApiError> {
    let backend = ready(&state)?;
    blocking(move || {
        let engine = HighlightEngine::with_top_m(backend, state.config().top_m);
        let base = match state.recent_report(&req.prompt, &req.document, req.revision) {
            Some(report) => report,
            None => {
                let mut report = engine.compute_highlights(&req.prompt, &req.document)?;
                report.revision = req.revision;
                report
            }
        };
        let report = engine.apply_edit(&base, req.char_start, req.char_end, &req.replacement)?;
        let edit = EditApplied {
            char_start: req.char_start,
            char_end: req.char_end,
            replacement: req.replacement,
            revision: report.revision,
        };
        state.remember_report(&report, Some(edit))?;
        Ok(Json(report))
    })
    .await
}

/// Serves on `listener` until `shutdown` resolves. The backend loads in the
/// background; until it is ready `/healthz` and every engine route answer 503.
pub async fn run(
    listener: TcpListener,
    config: ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<()> {
    let state = AppState::new(config);
    let loader = state.clone();
    let load = tokio::task::spawn_blocking(move || loader.config().load_backend());

    let sweeper = state.clone();
    let period = Duration::from_secs((state.config().session_ttl_seconds / 4).clamp(1, 60));
    let sweep = tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            sweeper.expire_idle(Instant::now());
        }
    });

    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, "listening");
    }
    let app = router(state.clone());
    let server = async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(shutdown)
            .await
            .map_err(Error::from)
    };
    let loading = async move {
        match load.await {
            Ok(Ok(backend)) => {
                tracing::info!(model_id = backend.model_id(), "backend ready");
                state.set_backend(backend);
                std::future::pending::<Result<()>>().await
            }
            Ok(Err(e)) => Err(e),
            Err(e) => Err(Error::Backend(format!("backend loader failed: {e}"))),
        }
    };
    let result = tokio::select! {
        r = server => r,
        r = loading => r,
    };
    sweep.abort();
    result
}

/// Binds the configured address and serves until interrupted.
pub async fn serve(config: ServiceConfig) -> Result<()> {
    let listener = TcpListener::bind((config.bind.as_str(), config.port)).await?;
    run(listener, config, shutdown_signal()).await
}

pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut sig) => {
                sig.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
    tracing::info!("shutting down");
}
