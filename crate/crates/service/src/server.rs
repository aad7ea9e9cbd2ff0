use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use depthmatte::io::{encode, Encoding};
use depthmatte::Error as CoreError;
use futures::{SinkExt, StreamExt};
use serde::Deserialize;
use tokio::net::TcpListener;
use tokio::sync::broadcast::error::RecvError;
use tower_http::services::ServeDir;

use crate::config::{ServiceConfig, SessionMode};
use crate::protocol::{field_from_serde, frame_header, ClientMessage, ServerMessage};
use crate::session::{Rendered, SessionHandle};
use crate::ServiceError;

#[derive(Clone)]
struct AppState {
    config: Arc<ServiceConfig>,
    shared: Option<SessionHandle>,
}

pub fn router(config: ServiceConfig) -> Result<Router, ServiceError> {
    let config = Arc::new(config);
    let shared = match config.mode {
        SessionMode::Broadcast => Some(SessionHandle::spawn(config.clone())?),
        SessionMode::PerSession => None,
    };
    let ui_dir = config.ui_dir.clone();
    let app = Router::new()
        .route("/healthz", get(healthz))
        .route("/backgrounds", get(backgrounds))
        .route("/ranges", get(ranges))
        .route("/ws", get(ws_upgrade))
        .with_state(AppState { config, shared });
    Ok(match ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => app,
    })
}

/// Binds `addr` and serves until the task is dropped. Returns the bound
/// address, which differs from `addr` when port 0 was requested.
pub async fn spawn(
    config: ServiceConfig,
    addr: SocketAddr,
) -> Result<(SocketAddr, tokio::task::JoinHandle<std::io::Result<()>>), ServiceError> {
    let app = router(config)?;
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::Bind { addr, source })?;
    let local = listener
        .local_addr()
        .map_err(|source| ServiceError::Bind { addr, source })?;
    tracing::info!("listening on http://{local}");
    let task = tokio::spawn(async move { axum::serve(listener, app).await });
    Ok((local, task))
}

pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> Result<(), ServiceError> {
    let (_, task) = spawn(config, addr).await?;
    task.await
        .map_err(|e| ServiceError::Serve(std::io::Error::other(e)))?
        .map_err(ServiceError::Serve)
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn backgrounds(State(state): State<AppState>) -> Json<serde_json::Value> {
    let names: Vec<&String> = state.config.backgrounds.keys().collect();
    Json(serde_json::json!({
        "backgrounds": names,
        "default": state.config.default_background,
    }))
}

async fn ranges() -> Json<serde_json::Value> {
    Json(depthmatte::params::range_table())
}

#[derive(Debug, Deserialize)]
struct StreamQuery {
    #[serde(default)]
    format: Encoding,
}

async fn ws_upgrade(
    ws: WebSocketUpgrade,
    Query(q): Query<StreamQuery>,
    State(state): State<AppState>,
) -> Response {
    let session = match &state.shared {
        Some(shared) => shared.clone(),
        None => match SessionHandle::spawn(state.config.clone()) {
            Ok(s) => s,
            Err(e) => {
                return (axum::http::StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response()
            }
        },
    };
    ws.on_upgrade(move |socket| client_loop(socket, session, state.config, q.format))
}

async fn client_loop(socket: WebSocket, session: SessionHandle, config: Arc<ServiceConfig>, format: Encoding) {
    let (mut tx, mut rx) = socket.split();
    let mut frames = session.subscribe();
    loop {
        tokio::select! {
            incoming = rx.next() => {
                let text = match incoming {
                    Some(Ok(Message::Text(text))) => text,
                    Some(Ok(Message::Binary(_))) => {
                        let reply = ServerMessage::error(vec![], "binary messages are not accepted");
                        if tx.send(Message::Text(reply.to_json())).await.is_err() {
                            break;
                        }
                        continue;
                    }
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                if let Some(reply) = handle_text(&session, &config, &text).await {
                    if tx.send(Message::Text(reply.to_json())).await.is_err() {
                        break;
                    }
                }
            }
            next = frames.recv() => {
                let rendered = match next {
                    Ok(r) => r,
                    Err(RecvError::Lagged(_)) => continue,
                    Err(RecvError::Closed) => {
                        let reply = ServerMessage::error(vec![], "pipeline stopped");
                        let _ = tx.send(Message::Text(reply.to_json())).await;
                        break;
                    }
                };
                let Some((bytes, timings)) = encode_frame(rendered, format).await else {
                    break;
                };
                if tx.send(Message::Binary(bytes)).await.is_err() {
                    break;
                }
                if tx.send(Message::Text(timings.to_json())).await.is_err() {
                    break;
                }
            }
        }
    }
}

async fn encode_frame(rendered: Arc<Rendered>, format: Encoding) -> Option<(Vec<u8>, ServerMessage)> {
    tokio::task::spawn_blocking(move || {
        let start = Instant::now();
        let payload = match encode(&rendered.frame, format) {
            Ok(p) => p,
            Err(e) => {
                tracing::warn!("encode failed: {e}");
                return None;
            }
        };
        let mut bytes = frame_header(rendered.frame_index, rendered.params_hash).to_vec();
        bytes.extend_from_slice(&payload);
        let mut timings = rendered.timings;
        timings.encode_ns = start.elapsed().as_nanos() as u64;
        timings.finish(timings.total_ns + timings.encode_ns);
        Some((bytes, ServerMessage::Timings { timings }))
    })
    .await
    .ok()
    .flatten()
}

async fn handle_text(session: &SessionHandle, config: &ServiceConfig, text: &str) -> Option<ServerMessage> {
    let msg: ClientMessage = match serde_json::from_str(text) {
        Ok(m) => m,
        Err(e) => {
            let message = e.to_string();
            return Some(ServerMessage::error(field_from_serde(&message), message));
        }
    };
    match msg {
        ClientMessage::SetParams { params } => Some(match session.set_params(params).await {
            Some(Ok(p)) => ServerMessage::ack(p),
            Some(Err(CoreError::Validation(errors))) => {
                let message = errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
                ServerMessage::error(errors.into_iter().map(|e| e.field).collect(), message)
            }
            Some(Err(e)) => ServerMessage::error(vec![], e.to_string()),
            None => ServerMessage::error(vec![], "pipeline stopped"),
        }),
        ClientMessage::SelectBackground { name } => match config.background(&name) {
            Some(bg) => {
                session.select_background(bg);
                None
            }
            None => Some(ServerMessage::error(
                vec!["name".into()],
                format!(
                    "unknown background `{name}` (available: {})",
                    config.backgrounds.keys().cloned().collect::<Vec<_>>().join(", ")
                ),
            )),
        },
        ClientMessage::Pause => {
            session.pause();
            None
        }
        ClientMessage::Resume => {
            session.resume();
            None
        }
    }
}
