//! HTTP service, all routes under `/v1`:
//!
//! | method | path | body | response |
//! |---|---|---|---|
//! | GET | `/v1/model` | | [`ModelInfo`] |
//! | POST | `/v1/sessions` | [`CreateSession`] | 201 [`SessionCreated`] |
//! | GET | `/v1/sessions/{id}/score` | | [`ScoreDocument`] |
//! | POST | `/v1/sessions/{id}/generate` | [`GenerationRequest`] | [`GenerationResult`] |
//! | POST | `/v1/sessions/{id}/undo` | | [`UndoResult`] |
//! | GET | `/v1/sessions/{id}/log` | | [`SessionLog`] |
//! | GET | `/v1/sessions/{id}/export/musicxml` | | MusicXML bytes |
//! | GET | `/v1/sessions/{id}/export/midi` | | Standard MIDI File bytes |
//! | DELETE | `/v1/sessions/{id}` | | 204 |
//!
//! Errors carry an [`ErrorRecord`](super::ErrorRecord): 400 for unreadable
//! bodies, 404 for unknown sessions, 409 while another request holds the
//! session, 422 with a violation list for requests breaking an invariant.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use tokio::sync::{Mutex as AsyncMutex, OwnedMutexGuard};

use super::session::{Limits, Session, SessionLog};
use super::wire::{CreateSession, GenerationRequest, GenerationResult, ModelInfo, ScoreDocument, SessionCreated, UndoResult};
use super::AppError;
use crate::ingest::{export_midi, export_musicxml, parse_musicxml};
use crate::models::ModelSet;

pub const MUSICXML_MIME: &str = "application/vnd.recordare.musicxml+xml";
pub const MIDI_MIME: &str = "audio/midi";
pub const DEFAULT_LENGTH: usize = 64;

type SessionHandle = Arc<AsyncMutex<Session>>;

/// Shared service state: the read-only model and the live sessions.
pub struct AppState {
    pub models: Arc<ModelSet>,
    pub limits: Limits,
    sessions: Mutex<HashMap<String, SessionHandle>>,
}

impl AppState {
    pub fn new(models: ModelSet, limits: Limits) -> Arc<Self> {
        Arc::new(Self {
            models: Arc::new(models),
            limits,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    pub fn session(&self, id: &str) -> Option<SessionHandle> {
        self.sessions.lock().expect("session table").get(id).cloned()
    }

    fn insert(&self, session: Session) {
        let id = session.id.clone();
        self.sessions.lock().expect("session table").insert(id, Arc::new(AsyncMutex::new(session)));
    }

    fn remove(&self, id: &str) -> Option<SessionHandle> {
        self.sessions.lock().expect("session table").remove(id)
    }

    /// The session, exclusively; 409 when a request already holds it.
    fn claim(&self, id: &str) -> Result<OwnedMutexGuard<Session>, AppError> {
        let handle = self.session(id).ok_or_else(|| AppError::NotFound(format!("session {id}")))?;
        handle
            .try_lock_owned()
            .map_err(|_| AppError::Conflict(format!("session {id} is busy with another request")))
    }
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        let status = match &self {
            AppError::Malformed(_) | AppError::Json(_) => StatusCode::BAD_REQUEST,
            AppError::NotFound(_) => StatusCode::NOT_FOUND,
            AppError::Conflict(_) => StatusCode::CONFLICT,
            AppError::Invalid(_) | AppError::Ingest(_) | AppError::Sampler(_) | AppError::Score(_) | AppError::Model(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            AppError::Io { .. } | AppError::Internal(_) | AppError::ChecksFailed(_) | AppError::Diagnostics(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(self.record())).into_response()
    }
}

fn body<T>(b: Result<Json<T>, JsonRejection>) -> Result<T, AppError> {
    b.map(|Json(x)| x).map_err(|e| AppError::Malformed(e.body_text()))
}

fn fresh_seed() -> u64 {
    rand::random()
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, AppError> + Send + 'static) -> Result<T, AppError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| AppError::Internal(format!("worker failed: {e}")))?
}

async fn model_info(State(state): State<Arc<AppState>>) -> Json<ModelInfo> {
    Json(ModelInfo::new(&state.models, state.limits.max_iterations))
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    req: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionCreated>), AppError> {
    let req = body(req)?;
    let id = format!("{:016x}", rand::random::<u64>());
    let models = state.models.clone();
    let limits = state.limits;
    let (session, seed) = blocking(move || match req.musicxml {
        Some(xml) => Ok((Session::from_score(id, models, parse_musicxml(xml.as_bytes())?)?, None)),
        None => {
            let seed = req.seed.unwrap_or_else(fresh_seed);
            let length = req.length.unwrap_or(DEFAULT_LENGTH);
            Ok((Session::generated(id, models, length, seed, req.iterations, &limits)?, Some(seed)))
        }
    })
    .await?;
    let created = SessionCreated {
        id: session.id.clone(),
        score: ScoreDocument::from_chorale(session.current()),
        seed,
    };
    state.insert(session);
    Ok((StatusCode::CREATED, Json(created)))
}

async fn get_score(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<ScoreDocument>, AppError> {
    let s = state.claim(&id)?;
    Ok(Json(ScoreDocument::from_chorale(s.current())))
}

async fn generate(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    req: Result<Json<GenerationRequest>, JsonRejection>,
) -> Result<Json<GenerationResult>, AppError> {
    let req = body(req)?;
    let mut s = state.claim(&id)?;
    let limits = state.limits;
    let result = blocking(move || {
        let entry = s.apply(&req, fresh_seed(), &limits)?;
        let (seed, iterations) = (entry.request.seed.unwrap_or(0), entry.request.iterations.unwrap_or(0));
        Ok(GenerationResult {
            score: ScoreDocument::from_chorale(s.current()),
            seed,
            iterations,
            depth: s.depth(),
        })
    })
    .await?;
    Ok(Json(result))
}

async fn undo(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<UndoResult>, AppError> {
    let mut s = state.claim(&id)?;
    s.undo()?;
    Ok(Json(UndoResult {
        score: ScoreDocument::from_chorale(s.current()),
        depth: s.depth(),
    }))
}

async fn get_log(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionLog>, AppError> {
    Ok(Json(state.claim(&id)?.log()))
}

fn attachment(mime: &'static str, name: String, bytes: Vec<u8>) -> Response {
    (
        [
            (header::CONTENT_TYPE, mime.to_string()),
            (header::CONTENT_DISPOSITION, format!("attachment; filename=\"{name}\"")),
        ],
        bytes,
    )
        .into_response()
}

async fn export_xml(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, AppError> {
    let s = state.claim(&id)?;
    Ok(attachment(MUSICXML_MIME, format!("{id}.musicxml"), export_musicxml(s.current())))
}

async fn export_mid(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, AppError> {
    let s = state.claim(&id)?;
    Ok(attachment(MIDI_MIME, format!("{id}.mid"), export_midi(s.current())))
}

async fn delete_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<StatusCode, AppError> {
    let _held = state.claim(&id)?;
    state.remove(&id);
    Ok(StatusCode::NO_CONTENT)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/model", get(model_info))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", delete(delete_session))
        .route("/v1/sessions/{id}/score", get(get_score))
        .route("/v1/sessions/{id}/generate", post(generate))
        .route("/v1/sessions/{id}/undo", post(undo))
        .route("/v1/sessions/{id}/log", get(get_log))
        .route("/v1/sessions/{id}/export/musicxml", get(export_xml))
        .route("/v1/sessions/{id}/export/midi", get(export_mid))
        .with_state(state)
}

/// Serves until interrupted.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> Result<(), AppError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| AppError::io(addr.to_string(), e))?;
    eprintln!("listening on http://{}", listener.local_addr().map_err(|e| AppError::io(addr.to_string(), e))?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| AppError::io(addr.to_string(), e))
}
