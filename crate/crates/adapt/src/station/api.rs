//! HTTP and server-sent-event interface for the operator console.

use std::convert::Infallible;
use std::fs;
use std::path::PathBuf;

use adapt_core::downlink::Command;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{broadcast, mpsc, oneshot};

use super::{mission_dir, missions_dir, valid_mission_id, SharedState, StreamEvent, EXPORT_GEOJSON, REPORT_JSON};
use crate::formats::feature_collection;

/// A command for the running session, answered with its sequence number.
#[derive(Debug)]
pub struct CommandRequest {
    pub command: Command,
    pub reply: oneshot::Sender<Result<u32, String>>,
}

/// Handles onto the mission currently receiving data.
#[derive(Debug, Clone)]
pub struct LiveMission {
    pub state: SharedState,
    pub events: broadcast::Sender<StreamEvent>,
    pub commands: mpsc::Sender<CommandRequest>,
}

#[derive(Debug, Clone)]
pub struct ApiState {
    pub data_dir: PathBuf,
    pub live: Option<LiveMission>,
}

pub fn router(state: ApiState) -> Router {
    Router::new()
        .route("/missions", get(list_missions))
        .route("/missions/{id}/export.geojson", get(export))
        .route("/stream", get(stream))
        .route("/command/exposure", post(command_exposure))
        .with_state(state)
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(json!({ "error": msg.into() }))).into_response()
}

impl LiveMission {
    fn id(&self) -> String {
        self.state.read().unwrap_or_else(|e| e.into_inner()).mission_id.clone()
    }
}

async fn list_missions(State(st): State<ApiState>) -> Response {
    let live_id = st.live.as_ref().map(LiveMission::id);
    let mut ids: Vec<String> = match fs::read_dir(missions_dir(&st.data_dir)) {
        Ok(rd) => rd
            .filter_map(Result::ok)
            .filter(|e| e.file_type().is_ok_and(|t| t.is_dir()))
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|id| valid_mission_id(id))
            .collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    };
    if let Some(id) = &live_id {
        if !ids.contains(id) {
            ids.push(id.clone());
        }
    }
    ids.sort();
    let out: Vec<Value> = ids
        .into_iter()
        .map(|id| {
            let report: Option<Value> =
                fs::read(mission_dir(&st.data_dir, &id).join(REPORT_JSON)).ok().and_then(|b| serde_json::from_slice(&b).ok());
            let live = st.live.as_ref().filter(|_| live_id.as_deref() == Some(id.as_str()));
            let (delivered, features) = match (live, &report) {
                (Some(l), _) => {
                    let s = l.state.read().unwrap_or_else(|e| e.into_inner());
                    (json!(s.delivered_count()), json!(s.delivered.iter().map(|d| d.polygons.len()).sum::<usize>()))
                }
                (None, Some(r)) => (r["analytics_delivered"].clone(), r["features"].clone()),
                (None, None) => (Value::Null, Value::Null),
            };
            json!({
                "id": id,
                "live": live.is_some(),
                "closed": report.is_some(),
                "analytics_delivered": delivered,
                "features": features,
            })
        })
        .collect();
    Json(out).into_response()
}

fn geojson(body: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/geo+json")], body).into_response()
}

async fn export(State(st): State<ApiState>, Path(id): Path<String>) -> Response {
    if !valid_mission_id(&id) {
        return error(StatusCode::NOT_FOUND, "no such mission");
    }
    if let Some(live) = st.live.as_ref().filter(|l| l.id() == id) {
        let s = live.state.read().unwrap_or_else(|e| e.into_inner());
        return match serde_json::to_vec(&feature_collection(&s.delivered)) {
            Ok(b) => geojson(b),
            Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        };
    }
    match fs::read(mission_dir(&st.data_dir, &id).join(EXPORT_GEOJSON)) {
        Ok(b) => geojson(b),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => error(StatusCode::NOT_FOUND, "no export for this mission"),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

fn to_sse(e: &StreamEvent) -> Event {
    Event::default().id(e.id.to_string()).event(e.topic).data(e.data.to_string())
}

/// Event stream starting with a `snapshot` of the whole state. A reader
/// that falls behind gets a `lagged` event with the number skipped.
fn live_events(live: &LiveMission) -> impl Stream<Item = Result<Event, Infallible>> {
    // Subscribe before reading the snapshot so nothing falls in between.
    let rx = live.events.subscribe();
    let snapshot = serde_json::to_string(&*live.state.read().unwrap_or_else(|e| e.into_inner())).unwrap_or_default();
    let first = stream::once(async move { Ok(Event::default().event("snapshot").data(snapshot)) });
    let rest = stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(e) => return Some((Ok(to_sse(&e)), rx)),
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    return Some((Ok(Event::default().event("lagged").data(n.to_string())), rx));
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    first.chain(rest)
}

async fn stream(State(st): State<ApiState>) -> Response {
    match &st.live {
        Some(live) => Sse::new(live_events(live)).keep_alive(KeepAlive::default()).into_response(),
        None => error(StatusCode::SERVICE_UNAVAILABLE, "no live mission"),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExposureRequest {
    exposure_us: f64,
}

async fn command_exposure(State(st): State<ApiState>, body: Result<Json<ExposureRequest>, axum::extract::rejection::JsonRejection>) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    let command = Command::SetMaxExposure { exposure_us: req.exposure_us };
    if let Err(e) = command.validate() {
        return error(StatusCode::BAD_REQUEST, e);
    }
    let Some(live) = &st.live else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "no live mission");
    };
    let (reply, rx) = oneshot::channel();
    if live.commands.send(CommandRequest { command, reply }).await.is_err() {
        return error(StatusCode::SERVICE_UNAVAILABLE, "mission has ended");
    }
    match rx.await {
        Ok(Ok(seq)) => (StatusCode::ACCEPTED, Json(json!({ "seq": seq, "status": "pending" }))).into_response(),
        Ok(Err(e)) => error(StatusCode::CONFLICT, e),
        Err(_) => error(StatusCode::SERVICE_UNAVAILABLE, "mission has ended"),
    }
}
