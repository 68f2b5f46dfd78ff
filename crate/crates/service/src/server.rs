//! HTTP endpoints and the per-session websocket loop.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use tokio::time::{interval, Instant, MissedTickBehavior};

use crate::library::{CorpusSummary, Library, SessionSlot};
use crate::protocol::{ClientMessage, ServerMessage};
use crate::session::{PointerPx, SessionConfig};

/// Audio tick period: one hop.
pub const TICK: Duration = Duration::from_millis(10);

pub fn router(library: Arc<Library>) -> Router {
    Router::new()
        .route("/corpora", get(list_corpora))
        .route("/materials/{id}/image", get(material_image))
        .route("/session", get(session_upgrade))
        .with_state(library)
}

/// Binds `addr` and serves until the task is cancelled.
pub async fn serve(addr: SocketAddr, library: Arc<Library>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(library)).await
}

async fn list_corpora(State(library): State<Arc<Library>>) -> Json<Vec<CorpusSummary>> {
    Json(library.summaries())
}

fn content_type(path: &std::path::Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        _ => "application/octet-stream",
    }
}

async fn material_image(State(library): State<Arc<Library>>, Path(id): Path<String>) -> Response {
    let Some(path) = library.get(&id).and_then(|m| m.image.clone()) else {
        return (StatusCode::NOT_FOUND, "no image for this material").into_response();
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

async fn session_upgrade(State(library): State<Arc<Library>>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| run_socket(socket, library))
}

async fn send_text(socket: &mut WebSocket, msg: &ServerMessage) -> bool {
    socket
        .send(Message::Text(msg.to_json().into()))
        .await
        .is_ok()
}

async fn run_socket(mut socket: WebSocket, library: Arc<Library>) {
    // Control phase: wait for a valid `open`.
    let slot = loop {
        let Some(Ok(msg)) = socket.recv().await else {
            return;
        };
        let text = match msg {
            Message::Text(text) => text,
            Message::Close(_) => return,
            _ => continue,
        };
        match serde_json::from_str::<ClientMessage>(&text) {
            Ok(ClientMessage::Open { corpus, dpi, seed }) => {
                let config = SessionConfig {
                    corpus_id: corpus,
                    dpi,
                    seed,
                };
                match library.open_session(&config) {
                    Ok(slot) => break slot,
                    Err(e) => {
                        if !send_text(&mut socket, &ServerMessage::error(e.code(), e.to_string()))
                            .await
                        {
                            return;
                        }
                    }
                }
            }
            Ok(ClientMessage::Close) => return,
            Ok(ClientMessage::Pointer { .. }) => {
                let reply = ServerMessage::error("not_open", "open a session first");
                if !send_text(&mut socket, &reply).await {
                    return;
                }
            }
            Err(e) => {
                if !send_text(
                    &mut socket,
                    &ServerMessage::error("bad_request", e.to_string()),
                )
                .await
                {
                    return;
                }
            }
        }
    };
    run_session(socket, slot).await;
}

async fn run_session(mut socket: WebSocket, mut slot: SessionSlot) {
    let opened = ServerMessage::opened(slot.session.id());
    if !send_text(&mut socket, &opened).await {
        return;
    }
    let mut ticker = interval(TICK);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Burst);
    loop {
        tokio::select! {
            scheduled = ticker.tick() => {
                if Instant::now().duration_since(scheduled) > TICK {
                    slot.session.record_underrun();
                }
                let frame = slot.session.emit_hop();
                if socket.send(Message::Binary(frame.into())).await.is_err() {
                    break;
                }
            }
            incoming = socket.recv() => {
                let Some(Ok(msg)) = incoming else { break };
                match msg {
                    Message::Text(text) => match serde_json::from_str::<ClientMessage>(&text) {
                        Ok(ClientMessage::Pointer { t, x, y }) => {
                            slot.session.ingest_pointer(PointerPx { t, x, y });
                        }
                        Ok(ClientMessage::Close) => break,
                        Ok(ClientMessage::Open { .. }) => {
                            let reply = ServerMessage::error("already_open", "session already open");
                            if !send_text(&mut socket, &reply).await {
                                break;
                            }
                        }
                        Err(e) => {
                            let reply = ServerMessage::error("bad_request", e.to_string());
                            if !send_text(&mut socket, &reply).await {
                                break;
                            }
                        }
                    },
                    Message::Close(_) => break,
                    _ => {}
                }
            }
        }
    }
    let stats = slot.session.stats();
    log::info!(
        "session {} closed: {} hops, {} underruns, {} selections, {} dropped events",
        slot.session.id(),
        stats.hops_emitted,
        stats.underruns,
        stats.selections,
        stats.dropped_events
    );
    let _ = socket.send(Message::Close(None)).await;
}
