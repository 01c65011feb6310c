//! HTTP and websocket front end. Each session runs as its own task that
//! owns the [`Session`] and paces [`Session::advance`] against the clock;
//! sockets talk to it through a command queue and listen on a broadcast
//! channel.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::time::Instant;

use dynsong_core::curves::CurveSet;
use dynsong_core::graph::{PortType, Registry};

use crate::config::ServeConfig;
use crate::library::{Library, LibraryError};
use crate::protocol::{ClientMessage, Reply, ServerMessage, StreamEvent, TransportState};
use crate::session::{Session, SessionError};

const EVENT_BUFFER: usize = 4096;

pub struct AppState {
    library: Library,
    registry: Arc<Registry>,
    config: ServeConfig,
    sessions: Mutex<HashMap<String, SessionHandle>>,
    next_id: AtomicU64,
}

#[derive(Clone)]
struct SessionHandle {
    commands: mpsc::Sender<Command>,
    events: broadcast::Sender<ServerMessage>,
}

enum Command {
    Client(ClientMessage, oneshot::Sender<Option<Reply>>),
    Status(oneshot::Sender<Value>),
}

impl AppState {
    pub fn new(config: ServeConfig, registry: Registry) -> Arc<Self> {
        Arc::new(AppState {
            library: Library::new(config.library.clone()),
            registry: Arc::new(registry),
            config,
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/songs", get(list_songs))
        .route("/songs/:id", get(get_song))
        .route("/blocks", get(list_blocks))
        .route("/sessions", post(create_session))
        .route("/sessions/:id", get(session_status))
        .route("/sessions/:id/ws", get(session_socket))
        .with_state(state)
}

/// Binds the listener; returns the bound address and the server future.
pub async fn bind(
    config: ServeConfig,
    registry: Registry,
) -> std::io::Result<(SocketAddr, impl std::future::Future<Output = std::io::Result<()>>)> {
    let listener = tokio::net::TcpListener::bind(&config.listen).await?;
    let addr = listener.local_addr()?;
    let app = router(AppState::new(config, registry));
    Ok((addr, async move { axum::serve(listener, app).await }))
}

struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl ToString) -> Self {
        ApiError {
            status,
            body: json!({"code": code, "message": message.to_string()}),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<LibraryError> for ApiError {
    fn from(e: LibraryError) -> Self {
        match &e {
            LibraryError::NotFound(_) => ApiError::new(StatusCode::NOT_FOUND, "not_found", e),
            LibraryError::Io { .. } => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "io", e),
            LibraryError::Song { .. } | LibraryError::Curves(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_file", e)
            }
        }
    }
}

async fn list_songs(State(app): State<Arc<AppState>>) -> Result<Json<Value>, ApiError> {
    Ok(Json(json!(app.library.list()?)))
}

async fn get_song(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let song = app.library.song(&id)?;
    let curves = app.library.curves(&id)?;
    Ok(Json(json!({"id": id, "song": song, "curves": curves})))
}

/// Registry descriptors with a `color` on every port, plus the colour table.
async fn list_blocks(State(app): State<Arc<AppState>>) -> Json<Value> {
    let blocks: Vec<Value> = app
        .registry
        .descriptors()
        .into_iter()
        .map(|d| {
            let mut v = serde_json::to_value(d).expect("descriptor serializes");
            for side in ["inputs", "outputs"] {
                if let Some(ports) = v.get_mut(side).and_then(Value::as_array_mut) {
                    for p in ports {
                        let ty: Option<PortType> = p.get("type").and_then(|t| serde_json::from_value(t.clone()).ok());
                        if let (Some(ty), Some(obj)) = (ty, p.as_object_mut()) {
                            obj.insert("color".into(), json!(ty.colour()));
                        }
                    }
                }
            }
            v
        })
        .collect();
    let port_types: Vec<Value> = PortType::ALL.iter().map(|t| json!({"type": t, "color": t.colour()})).collect();
    Json(json!({"blocks": blocks, "port_types": port_types}))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    song: String,
    #[serde(default)]
    curves: Option<CurveSet<f64>>,
    #[serde(default)]
    seed: Option<u64>,
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let doc = app.library.song(&req.song)?;
    let curves = match req.curves {
        Some(c) => c,
        None => app.library.curves(&req.song)?,
    };
    let invalid = |diags: Vec<_>| ApiError {
        status: StatusCode::UNPROCESSABLE_ENTITY,
        body: json!({"code": "validation", "message": "song is invalid", "diagnostics": diags}),
    };
    let graph = doc.into_graph(&app.registry).map_err(invalid)?;
    let id = format!("s{}", app.next_id.fetch_add(1, Ordering::Relaxed));
    let seed = req.seed.or(app.config.default_seed);
    let session = match Session::new(&id, graph, app.registry.clone(), curves, seed) {
        Ok(s) => s,
        Err(SessionError::Validation(d)) => return Err(invalid(d)),
        Err(e) => return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e)),
    };
    let length = session.graph().length_bars();
    let (cmd_tx, cmd_rx) = mpsc::channel(64);
    let (ev_tx, _) = broadcast::channel(EVENT_BUFFER);
    let handle = SessionHandle {
        commands: cmd_tx,
        events: ev_tx.clone(),
    };
    app.sessions.lock().unwrap().insert(id.clone(), handle);
    tokio::spawn(run_session(
        session,
        app.library.clone(),
        req.song.clone(),
        cmd_rx,
        ev_tx,
        app.config.speed,
    ));
    tracing::info!(session = %id, song = %req.song, "session created");
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "session": id,
            "state": TransportState::Stopped,
            "length_bars": length,
            "socket": format!("/sessions/{id}/ws"),
        })),
    ))
}

fn handle_of(app: &AppState, id: &str) -> Result<SessionHandle, ApiError> {
    app.sessions
        .lock()
        .unwrap()
        .get(id)
        .cloned()
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no session {id:?}")))
}

async fn session_status(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let handle = handle_of(&app, &id)?;
    let (tx, rx) = oneshot::channel();
    let gone = || ApiError::new(StatusCode::GONE, "session_closed", "session task has ended");
    handle.commands.send(Command::Status(tx)).await.map_err(|_| gone())?;
    Ok(Json(rx.await.map_err(|_| gone())?))
}

async fn session_socket(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let handle = handle_of(&app, &id)?;
    Ok(ws.on_upgrade(move |socket| client_loop(socket, handle)))
}

async fn send_json(socket: &mut WebSocket, msg: &ServerMessage) -> bool {
    let text = serde_json::to_string(msg).expect("messages serialize");
    socket.send(Message::Text(text)).await.is_ok()
}

async fn client_loop(mut socket: WebSocket, handle: SessionHandle) {
    let mut events = handle.events.subscribe();
    loop {
        tokio::select! {
            incoming = socket.recv() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                let reply = match serde_json::from_str::<ClientMessage>(&text) {
                    Err(e) => Some(Reply::error("bad_message", e.to_string())),
                    Ok(msg) => {
                        let (tx, rx) = oneshot::channel();
                        if handle.commands.send(Command::Client(msg, tx)).await.is_err() {
                            break;
                        }
                        match rx.await {
                            Ok(r) => r,
                            Err(_) => break,
                        }
                    }
                };
                if let Some(r) = reply {
                    if !send_json(&mut socket, &ServerMessage::Reply(r)).await {
                        break;
                    }
                }
            }
            ev = events.recv() => {
                let msg = match ev {
                    Ok(m) => m,
                    Err(broadcast::error::RecvError::Lagged(n)) => {
                        ServerMessage::Reply(Reply::error("lagged", format!("{n} events dropped")))
                    }
                    Err(broadcast::error::RecvError::Closed) => break,
                };
                if !send_json(&mut socket, &msg).await {
                    break;
                }
            }
        }
    }
}

fn publish(events: &broadcast::Sender<ServerMessage>, batch: Vec<StreamEvent>) {
    for ev in batch {
        // no subscribers is fine
        let _ = events.send(ServerMessage::Event(ev));
    }
}

fn ack(command: &str, effective_bar: Option<u32>) -> Option<Reply> {
    Some(Reply::Ack {
        command: command.into(),
        effective_bar,
    })
}

fn failed(e: impl std::fmt::Display, code: &str) -> Option<Reply> {
    Some(Reply::error(code, e.to_string()))
}

/// Owns one session. `next` is when the playhead should next advance;
/// `paused_left` keeps the unplayed part of a bar across a pause.
async fn run_session(
    mut session: Session,
    library: Library,
    song_id: String,
    mut commands: mpsc::Receiver<Command>,
    events: broadcast::Sender<ServerMessage>,
    speed: f64,
) {
    let mut next: Option<Instant> = None;
    let mut paused_left: Option<Duration> = None;
    let bar_time = |s: &Session| Duration::from_secs_f64(s.current_bar_seconds().unwrap_or(0.0) / speed);

    loop {
        let deadline = next;
        tokio::select! {
            cmd = commands.recv() => {
                let Some(cmd) = cmd else { break };
                let (msg, reply_to) = match cmd {
                    Command::Status(tx) => {
                        let _ = tx.send(json!({
                            "session": session.id(),
                            "state": session.state(),
                            "playhead_bar": session.playhead_bar(),
                            "scheduled_horizon_bar": session.scheduled_horizon_bar(),
                            "effective_bar": session.effective_bar(),
                            "curves": session.curves(),
                        }));
                        continue;
                    }
                    Command::Client(m, tx) => (m, tx),
                };
                let reply = match msg {
                    ClientMessage::Play => {
                        let was = session.state();
                        publish(&events, session.play());
                        if session.state() == TransportState::Playing && was != TransportState::Playing {
                            let wait = if was == TransportState::Paused { paused_left.take() } else { None };
                            next = Some(Instant::now() + wait.unwrap_or_default());
                        }
                        None
                    }
                    ClientMessage::Pause => {
                        if session.state() == TransportState::Playing {
                            paused_left = next.map(|t| t.saturating_duration_since(Instant::now()));
                        }
                        publish(&events, session.pause());
                        next = None;
                        None
                    }
                    ClientMessage::Stop => {
                        publish(&events, session.stop());
                        next = None;
                        paused_left = None;
                        None
                    }
                    ClientMessage::Seek { bar } => match session.seek(bar) {
                        Ok(evs) => {
                            publish(&events, evs);
                            paused_left = None;
                            if session.state() == TransportState::Playing {
                                next = Some(Instant::now());
                            }
                            None
                        }
                        Err(e) => failed(&e, e.code()),
                    },
                    ClientMessage::CurveEdit { curve, op } => match session.apply_curve_edit(curve, &op) {
                        Ok(bar) => ack("curve_edit", Some(bar)),
                        Err(e) => failed(&e, e.code()),
                    },
                    ClientMessage::Save => match library.save_curves(&song_id, session.curves()) {
                        Ok(_) => ack("save", None),
                        Err(e) => failed(&e, "save_failed"),
                    },
                };
                let _ = reply_to.send(reply);
            }
            _ = tokio::time::sleep_until(deadline.unwrap_or_else(Instant::now)), if deadline.is_some() => {
                match session.advance() {
                    Ok(evs) => publish(&events, evs),
                    Err(e) => {
                        tracing::warn!(session = %session.id(), error = %e, "bar evaluation failed");
                        let _ = events.send(ServerMessage::Reply(Reply::error(e.code(), e.to_string())));
                        publish(&events, session.stop());
                    }
                }
                next = match session.state() {
                    TransportState::Playing => Some(deadline.unwrap_or_else(Instant::now) + bar_time(&session)),
                    _ => None,
                };
            }
        }
    }
}
