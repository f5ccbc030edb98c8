//! Command-line front end and the HTTP session service.
//!
//! Every failure maps to an [`AppError`], rendered as an [`ErrorRecord`]
//! on stderr by the CLI and as the response body by the service.

pub mod cli;
pub mod server;
pub mod session;
pub mod wire;

pub use server::{router, serve, AppState};
pub use session::{admit, apply_request, resolve, Limits, LogEntry, Session, SessionLog};
pub use wire::{
    Cell, CreateSession, ErrorBody, ErrorRecord, FermataOverride, GenerationRequest, GenerationResult, KeyOverride,
    MetadataDocument, ModelInfo, Overrides, Pin, Region, ScoreDocument, SessionCreated, UndoResult, Violation,
    VoiceDocument, VoiceVocabulary, DOCUMENT_VERSION,
};

use std::path::PathBuf;

use crate::diagnostics::DiagnosticsError;
use crate::ingest::IngestError;
use crate::models::ModelError;
use crate::sampler::SamplerError;
use crate::score::ScoreError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("invalid request ({} violations)", .0.len())]
    Invalid(Vec<Violation>),
    #[error("malformed request: {0}")]
    Malformed(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("internal error: {0}")]
    Internal(String),
    #[error("{0} diagnostic checks failed")]
    ChecksFailed(usize),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AppError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AppError::Invalid(_) => "invalid_request",
            AppError::Malformed(_) => "malformed_request",
            AppError::NotFound(_) => "not_found",
            AppError::Conflict(_) => "conflict",
            AppError::Io { .. } => "io",
            AppError::Internal(_) => "internal",
            AppError::ChecksFailed(_) => "checks_failed",
            AppError::Ingest(_) => "ingest",
            AppError::Model(_) => "model",
            AppError::Sampler(_) => "sampler",
            AppError::Diagnostics(_) => "diagnostics",
            AppError::Score(_) => "score",
            AppError::Json(_) => "json",
        }
    }

    pub fn record(&self) -> ErrorRecord {
        ErrorRecord {
            error: ErrorBody {
                kind: self.kind().to_string(),
                message: self.to_string(),
                violations: match self {
                    AppError::Invalid(v) => v.clone(),
                    _ => Vec::new(),
                },
            },
        }
    }
}
