//! HTTP routes and websocket pumps.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use gmob_core::data::{decode_pgm, Quartile};
use gmob_core::sim::{FlightLog, PipelineConfig};
use tokio::time::Instant;

use crate::error::ServiceError;
use crate::protocol::{
    CreateSession, GestureAck, GestureRequest, MissionRequest, MissionResult, SessionClosed, SessionCreated,
    SessionList, SessionState, Source, StreamFrame, TickFrame, VERSION,
};
use crate::session::{Session, StreamCursor, StreamOptions};

pub const PGM_MIME: &str = "image/x-portable-graymap";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub stream: StreamOptions,
}

pub struct AppState {
    pub config: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
}

pub type Shared = Arc<AppState>;

impl AppState {
    pub fn new(config: ServiceConfig) -> Shared {
        Arc::new(AppState {
            config,
            sessions: RwLock::new(HashMap::new()),
        })
    }

    pub fn session(&self, id: &str) -> Result<Arc<Session>, ServiceError> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("session {id}")))
    }

    pub fn create(&self, req: CreateSession) -> Result<Arc<Session>, ServiceError> {
        check_version(req.v)?;
        let cfg = match (req.config, req.config_toml) {
            (Some(c), _) => c,
            (None, Some(text)) => PipelineConfig::from_toml_str(&text)?,
            (None, None) => PipelineConfig::default(),
        };
        cfg.validate()?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let s = Session::start(id.clone(), cfg, req.seed, req.clock, req.debug, self.config.stream)?;
        self.sessions
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(id, Arc::clone(&s));
        Ok(s)
    }

    pub fn remove(&self, id: &str) -> Result<Arc<Session>, ServiceError> {
        self.sessions
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .remove(id)
            .ok_or_else(|| ServiceError::NotFound(format!("session {id}")))
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }
}

fn check_version(v: u32) -> Result<(), ServiceError> {
    if v != VERSION {
        return Err(ServiceError::BadRequest(format!(
            "unsupported protocol version {v}; this server speaks {VERSION}"
        )));
    }
    Ok(())
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ServiceError> {
    let body = if body.iter().all(u8::is_ascii_whitespace) {
        b"{}"
    } else {
        body
    };
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("json: {e}")))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session).get(list_sessions))
        .route("/v1/sessions/{id}", get(get_session).delete(delete_session))
        .route("/v1/sessions/{id}/gestures", post(submit_gesture))
        .route("/v1/sessions/{id}/stream", get(stream))
        .route("/v1/sessions/{id}/mission", post(mission))
        .route("/v1/sessions/{id}/log", get(get_log))
        .route("/v1/sessions/{id}/replay", get(replay))
        .with_state(state)
}

async fn create_session(State(st): State<Shared>, body: Bytes) -> Result<Response, ServiceError> {
    let req: CreateSession = parse_json(&body)?;
    let s = blocking(move || st.create(req)).await?;
    Ok((
        StatusCode::CREATED,
        Json(SessionCreated {
            v: VERSION,
            id: s.id.clone(),
        }),
    )
        .into_response())
}

async fn list_sessions(State(st): State<Shared>) -> Json<SessionList> {
    Json(SessionList {
        v: VERSION,
        ids: st.ids(),
    })
}

async fn get_session(State(st): State<Shared>, Path(id): Path<String>) -> Result<Json<SessionState>, ServiceError> {
    Ok(Json(st.session(&id)?.snapshot()))
}

async fn delete_session(State(st): State<Shared>, Path(id): Path<String>) -> Result<Json<SessionClosed>, ServiceError> {
    let s = st.remove(&id)?;
    let dir = st.config.data_dir.clone();
    let file = blocking(move || s.close(&dir)).await?;
    Ok(Json(SessionClosed { v: VERSION, id, file }))
}

async fn submit_gesture(
    State(st): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<GestureAck>, ServiceError> {
    let s = st.session(&id)?;
    let ctype = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("application/json")
        .to_ascii_lowercase();
    let image = if ctype.starts_with(PGM_MIME) {
        Some(body.to_vec())
    } else if ctype.starts_with("application/json") {
        let req: GestureRequest = parse_json(&body)?;
        check_version(req.v)?;
        match (req.pgm_base64, req.class_id, req.confidence) {
            (Some(b64), None, None) => Some(
                base64::engine::general_purpose::STANDARD
                    .decode(b64.trim())
                    .map_err(|e| ServiceError::BadRequest(format!("pgm_base64: {e}")))?,
            ),
            (None, Some(c), Some(p)) => return Ok(Json(s.submit(c, p, req.quartile.unwrap_or(Quartile::TL))?)),
            _ => {
                return Err(ServiceError::BadRequest(
                    "send either `pgm_base64` or both `class_id` and `confidence`".into(),
                ))
            }
        }
    } else {
        return Err(ServiceError::Unsupported(ctype));
    };
    let bytes = image.unwrap_or_default();
    let ack = blocking(move || {
        let frame = decode_pgm(&bytes)?;
        let (class_id, confidence, quartile) = s.classify(&frame)?;
        s.submit(class_id, confidence, quartile)
    })
    .await?;
    Ok(Json(ack))
}

fn query_u64(q: &HashMap<String, String>, key: &str) -> Result<Option<u64>, ServiceError> {
    q.get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| ServiceError::invalid(key, format!("expected an integer, got `{v}`")))
        })
        .transpose()
}

async fn stream(
    State(st): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
    ws: WebSocketUpgrade,
) -> Result<Response, ServiceError> {
    let s = st.session(&id)?;
    let cursor = s.subscribe(query_u64(&q, "last_tick")?);
    // the socket task holds only the cursor so a deleted session can end it
    drop(s);
    Ok(ws.on_upgrade(move |socket| pump(socket, cursor)))
}

async fn pump(mut socket: WebSocket, mut cursor: StreamCursor) {
    loop {
        tokio::select! {
            frame = cursor.next() => match frame {
                Some(text) => {
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        return;
                    }
                }
                None => break,
            },
            msg = socket.recv() => match msg {
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => return,
                _ => {}
            },
        }
    }
    let _ = socket.send(Message::Close(None)).await;
}

async fn mission(
    State(st): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<MissionResult>, ServiceError> {
    let s = st.session(&id)?;
    let req: MissionRequest = parse_json(&body)?;
    check_version(req.v)?;
    let seed = req.seed.unwrap_or(s.seed);
    let dir = st.config.data_dir.clone();
    let out = blocking(move || s.run_mission(&req.mission, seed, &dir)).await?;
    Ok(Json(out))
}

fn pick_log(s: &Session, q: &HashMap<String, String>) -> Result<FlightLog, ServiceError> {
    match q.get("source").map(String::as_str).unwrap_or("live") {
        "live" => Ok(s.live_log()),
        "mission" => Ok(s.mission_log(q.get("file").map(String::as_str))?.log),
        other => Err(ServiceError::invalid(
            "source",
            format!("expected `live` or `mission`, got `{other}`"),
        )),
    }
}

async fn get_log(
    State(st): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ServiceError> {
    let s = st.session(&id)?;
    let log = pick_log(&s, &q)?;
    Ok((
        [
            (header::CONTENT_TYPE, "text/plain; charset=utf-8".to_string()),
            (
                header::HeaderName::from_static("x-gmob-log-rows"),
                log.len().to_string(),
            ),
        ],
        log.to_text(),
    )
        .into_response())
}

/// `realtime` = 1, `accelerated` = unpaced, or a positive speed-up factor.
fn parse_pace(q: &HashMap<String, String>) -> Result<Option<f64>, ServiceError> {
    match q.get("pace").map(String::as_str).unwrap_or("realtime") {
        "realtime" => Ok(Some(1.0)),
        "accelerated" => Ok(None),
        other => match other.parse::<f64>() {
            Ok(f) if f.is_finite() && f > 0.0 => Ok(Some(f)),
            _ => Err(ServiceError::invalid(
                "pace",
                format!("expected realtime, accelerated or a factor > 0, got `{other}`"),
            )),
        },
    }
}

async fn replay(
    State(st): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
    ws: WebSocketUpgrade,
) -> Result<Response, ServiceError> {
    let s = st.session(&id)?;
    let log = pick_log(&s, &q)?;
    let pace = parse_pace(&q)?;
    let debug = s.debug;
    Ok(ws.on_upgrade(move |socket| replay_pump(socket, log, pace, debug)))
}

async fn replay_pump(mut socket: WebSocket, log: FlightLog, pace: Option<f64>, debug: bool) {
    let start = Instant::now();
    let t0 = log.rows.first().map_or(0.0, |r| r.t);
    for (i, row) in log.rows.iter().enumerate() {
        if let Some(f) = pace {
            let at = start + Duration::from_secs_f64(((row.t - t0) / f).max(0.0));
            tokio::time::sleep_until(at).await;
        }
        let frame = StreamFrame::Tick(TickFrame::from_row(i as u64 + 1, Source::Replay, row, debug));
        if socket.send(Message::Text(frame.to_json().into())).await.is_err() {
            return;
        }
    }
    let _ = socket.send(Message::Close(None)).await;
}

pub async fn serve(addr: std::net::SocketAddr, state: Shared) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
