mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use chorale::app::{router, AppState, Limits, ModelInfo, SessionCreated, SessionLog};
use chorale::ingest::{export_musicxml, parse_musicxml};
use common::{minicorpus_dir, small_model};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Reply {
    status: StatusCode,
    content_type: Option<String>,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

fn state() -> Arc<AppState> {
    AppState::new(small_model().clone(), Limits::default())
}

async fn call(state: &Arc<AppState>, method: Method, uri: &str, body: Option<String>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header(header::CONTENT_TYPE, "application/json");
    }
    let req = req.body(body.map(Body::from).unwrap_or_else(Body::empty)).unwrap();
    let res = router(state.clone()).oneshot(req).await.unwrap();
    let status = res.status();
    let content_type = res.headers().get(header::CONTENT_TYPE).map(|v| v.to_str().unwrap().to_string());
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, content_type, body }
}

fn upload() -> String {
    std::fs::read_to_string(minicorpus_dir().join("exercise_01.musicxml")).unwrap()
}

async fn create(state: &Arc<AppState>, body: Value) -> SessionCreated {
    let r = call(state, Method::POST, "/v1/sessions", Some(body.to_string())).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&r.body));
    serde_json::from_value(r.json()).unwrap()
}

#[tokio::test]
async fn model_info_lists_vocabularies() {
    let s = state();
    let r = call(&s, Method::GET, "/v1/model", None).await;
    assert_eq!(r.status, StatusCode::OK);
    let info: ModelInfo = serde_json::from_value(r.json()).unwrap();
    assert_eq!(info.vocabularies.len(), 4);
    assert_eq!(info.ticks_per_bar, 16);
    assert_eq!(info.delta_t, 4);
    assert!(info.vocabularies.iter().all(|v| v.tokens.contains(&"__".to_string())));
}

#[tokio::test]
async fn upload_then_export_round_trips() {
    let s = state();
    let xml = upload();
    let created = create(&s, json!({ "musicxml": xml })).await;
    assert_eq!(created.seed, None);

    let r = call(&s, Method::GET, &format!("/v1/sessions/{}/score", created.id), None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json(), serde_json::to_value(&created.score).unwrap());

    let r = call(&s, Method::GET, &format!("/v1/sessions/{}/export/musicxml", created.id), None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.content_type.as_deref(), Some("application/vnd.recordare.musicxml+xml"));
    let expected = export_musicxml(&parse_musicxml(xml.as_bytes()).unwrap());
    assert_eq!(r.body, expected);

    let r = call(&s, Method::GET, &format!("/v1/sessions/{}/export/midi", created.id), None).await;
    assert_eq!(r.content_type.as_deref(), Some("audio/midi"));
    assert_eq!(&r.body[..4], b"MThd");
}

#[tokio::test]
async fn generated_sessions_repeat_per_seed() {
    let s = state();
    let a = create(&s, json!({ "length": 32, "seed": 5, "iterations": 4000 })).await;
    let b = create(&s, json!({ "length": 32, "seed": 5, "iterations": 4000 })).await;
    assert_eq!(a.seed, Some(5));
    assert_ne!(a.id, b.id);
    assert_eq!(a.score, b.score);
    assert_eq!(a.score.length, 32);
    let c = create(&s, json!({ "length": 32 })).await;
    assert!(c.seed.is_some());
}

#[tokio::test]
async fn pinned_singleton_region_changes_only_that_cell() {
    let s = state();
    let created = create(&s, json!({ "musicxml": upload() })).await;
    let before = created.score.clone();
    let info: ModelInfo = serde_json::from_value(call(&s, Method::GET, "/v1/model", None).await.json()).unwrap();
    let current = &before.voices[1].tokens[4];
    let target = info.vocabularies[1]
        .tokens
        .iter()
        .find(|t| *t != "__" && *t != current)
        .unwrap()
        .clone();
    let req = json!({
        "region": { "kind": "cells", "cells": [{ "voice": "alto", "tick": 5 }] },
        "pins": [{ "voice": "alto", "tick": 5, "tokens": [target] }],
        "seed": 1,
    });
    let r = call(&s, Method::POST, &format!("/v1/sessions/{}/generate", created.id), Some(req.to_string())).await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.body));
    let v = r.json();
    assert_eq!(v["depth"], 1);
    assert_eq!(v["iterations"], 100);
    let after: chorale::app::ScoreDocument = serde_json::from_value(v["score"].clone()).unwrap();
    for (voice, (x, y)) in before.voices.iter().zip(&after.voices).enumerate() {
        for (t, (p, q)) in x.tokens.iter().zip(&y.tokens).enumerate() {
            if (voice, t) == (1, 4) {
                assert_eq!(q, &target);
            } else {
                assert_eq!(p, q, "voice {voice} tick {}", t + 1);
            }
        }
    }
    assert_eq!(before.metadata, after.metadata);
}

#[tokio::test]
async fn undo_then_same_seed_reproduces_bytes() {
    let s = state();
    let created = create(&s, json!({ "musicxml": upload() })).await;
    let id = &created.id;
    let req = json!({
        "region": { "kind": "rect", "voices": ["alto", "tenor"], "start": 1, "end": 16 },
        "seed": 42,
        "overrides": { "fermata": [{ "tick": 16, "value": true }] },
    })
    .to_string();
    let first = call(&s, Method::POST, &format!("/v1/sessions/{id}/generate"), Some(req.clone())).await;
    assert_eq!(first.status, StatusCode::OK);
    let xml_first = call(&s, Method::GET, &format!("/v1/sessions/{id}/export/musicxml"), None).await.body;

    let undone = call(&s, Method::POST, &format!("/v1/sessions/{id}/undo"), None).await;
    assert_eq!(undone.status, StatusCode::OK);
    assert_eq!(undone.json()["depth"], 0);
    assert_eq!(undone.json()["score"], serde_json::to_value(&created.score).unwrap());
    let r = call(&s, Method::POST, &format!("/v1/sessions/{id}/undo"), None).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);

    let second = call(&s, Method::POST, &format!("/v1/sessions/{id}/generate"), Some(req)).await;
    assert_eq!(second.json()["score"], first.json()["score"]);
    let xml_second = call(&s, Method::GET, &format!("/v1/sessions/{id}/export/musicxml"), None).await.body;
    assert_eq!(xml_first, xml_second);

    let log: SessionLog = serde_json::from_value(call(&s, Method::GET, &format!("/v1/sessions/{id}/log"), None).await.json()).unwrap();
    assert_eq!(log.entries.len(), 1);
    assert_eq!(log.entries[0].request.seed, Some(42));
    assert_eq!(log.entries[0].request.iterations, Some(100 * 32));
    let handle = s.session(id).unwrap();
    let replayed = handle.lock().await.replay().unwrap();
    assert_eq!(export_musicxml(&replayed), xml_second);
}

#[tokio::test]
async fn busy_session_is_a_conflict() {
    let s = state();
    let created = create(&s, json!({ "musicxml": upload() })).await;
    let uri = format!("/v1/sessions/{}/score", created.id);
    let handle = s.session(&created.id).unwrap();
    let held = handle.lock().await;
    let r = call(&s, Method::GET, &uri, None).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.json()["error"]["kind"], "conflict");
    drop(held);
    assert_eq!(call(&s, Method::GET, &uri, None).await.status, StatusCode::OK);
}

#[tokio::test]
async fn error_statuses() {
    let s = state();
    let r = call(&s, Method::GET, "/v1/sessions/missing/score", None).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["error"]["kind"], "not_found");

    let created = create(&s, json!({ "musicxml": upload() })).await;
    let uri = format!("/v1/sessions/{}/generate", created.id);
    let bad = json!({
        "region": { "kind": "cells", "cells": [{ "voice": "bass", "tick": 0 }] },
        "pins": [{ "voice": "alto", "tick": 3, "tokens": ["C4"] }],
        "iterations": 10_000_000,
    });
    let r = call(&s, Method::POST, &uri, Some(bad.to_string())).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    let v = r.json();
    assert_eq!(v["error"]["kind"], "invalid_request");
    assert_eq!(v["error"]["violations"][0]["field"], "iterations");

    let bad = json!({
        "region": { "kind": "cells", "cells": [{ "voice": "bass", "tick": 0 }] },
        "pins": [{ "voice": "alto", "tick": 3, "tokens": ["Q9"] }],
    });
    let v = call(&s, Method::POST, &uri, Some(bad.to_string())).await.json();
    let fields: Vec<&str> = v["error"]["violations"].as_array().unwrap().iter().map(|x| x["field"].as_str().unwrap()).collect();
    assert!(fields.contains(&"region") && fields.contains(&"pins[0]") && fields.contains(&"pins[0].tokens[0]"), "{fields:?}");

    let r = call(&s, Method::POST, &uri, Some("{not json".into())).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["error"]["kind"], "malformed_request");

    let r = call(&s, Method::POST, "/v1/sessions", Some(json!({ "musicxml": "<nope/>" }).to_string())).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);

    let r = call(&s, Method::DELETE, &format!("/v1/sessions/{}", created.id), None).await;
    assert_eq!(r.status, StatusCode::NO_CONTENT);
    assert_eq!(call(&s, Method::GET, &format!("/v1/sessions/{}/score", created.id), None).await.status, StatusCode::NOT_FOUND);
}
