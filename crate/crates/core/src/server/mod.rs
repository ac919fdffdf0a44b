//! Live teleoperation over a WebSocket at `/session`.
//!
//! One task owns the [`SessionCore`] and ticks it at 50 Hz. Connection
//! handlers only exchange messages with that task: inbound commands over an
//! mpsc channel, outbound frames over a bounded broadcast channel that drops
//! the oldest frames for clients that fall behind. The first client to
//! connect gets command authority; later clients observe. The simulation
//! pauses while no pilot is connected.

pub mod messages;
pub mod session;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot};

pub use messages::{ClientCommand, ClientMessage, Role, ServerMessage, Telemetry, SCHEMA_VERSION};
pub use session::{SessionCore, STALE_AFTER_MS, TICK_HZ};

use crate::sim::TrialMetrics;

/// Frames buffered per observer before the oldest are dropped.
pub const BROADCAST_CAPACITY: usize = 256;

#[derive(Debug)]
enum Inbound {
    Join {
        id: u64,
        reply: oneshot::Sender<Vec<String>>,
    },
    Leave {
        id: u64,
    },
    Command {
        id: u64,
        command: ClientCommand,
        reply: mpsc::Sender<String>,
    },
}

#[derive(Clone)]
struct AppState {
    inbound: mpsc::Sender<Inbound>,
    outbound: broadcast::Sender<Arc<str>>,
    next_id: Arc<std::sync::atomic::AtomicU64>,
}

pub struct ServeOptions {
    pub session: SessionCore,
    pub tick_period: Duration,
    /// Where to write the final metrics as JSON.
    pub out: Option<PathBuf>,
}

impl ServeOptions {
    pub fn new(session: SessionCore) -> Self {
        Self {
            session,
            tick_period: Duration::from_secs_f64(1.0 / TICK_HZ),
            out: None,
        }
    }
}

/// Serves one session on `listener` and returns its final metrics.
pub async fn serve(listener: TcpListener, opts: ServeOptions) -> anyhow::Result<TrialMetrics> {
    let (inbound_tx, inbound_rx) = mpsc::channel(1024);
    let (outbound_tx, _) = broadcast::channel(BROADCAST_CAPACITY);
    let state = AppState {
        inbound: inbound_tx,
        outbound: outbound_tx.clone(),
        next_id: Arc::new(0.into()),
    };
    let app = Router::new().route("/session", get(upgrade)).with_state(state);
    let (done_tx, done_rx) = oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = done_rx.await;
            })
            .await
    });

    let metrics = session_loop(opts.session, opts.tick_period, inbound_rx, outbound_tx).await;
    if let Some(path) = &opts.out {
        std::fs::write(path, serde_json::to_string_pretty(&metrics)?)?;
    }
    // let handlers flush the result frame before the listener closes
    tokio::time::sleep(Duration::from_millis(100)).await;
    let _ = done_tx.send(());
    let _ = tokio::time::timeout(Duration::from_secs(2), server).await;
    Ok(metrics)
}

async fn session_loop(
    mut core: SessionCore,
    period: Duration,
    mut inbound: mpsc::Receiver<Inbound>,
    outbound: broadcast::Sender<Arc<str>>,
) -> TrialMetrics {
    let mut pilot: Option<u64> = None;
    let mut clock = tokio::time::interval(period);
    clock.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    let cfg = *core.simulation().config();
    loop {
        tokio::select! {
            msg = inbound.recv() => {
                let Some(msg) = msg else { break };
                match msg {
                    Inbound::Join { id, reply } => {
                        let role = if pilot.is_none() {
                            pilot = Some(id);
                            Role::Pilot
                        } else {
                            Role::Observer
                        };
                        let hello = ServerMessage::Hello {
                            v: SCHEMA_VERSION,
                            role,
                            mode: core.simulation().mode(),
                            tick_hz: TICK_HZ,
                            dt: cfg.dt,
                        };
                        let _ = reply.send(vec![hello.to_json(), core.scenario_message().to_json()]);
                    }
                    Inbound::Leave { id } => {
                        if pilot == Some(id) {
                            pilot = None;
                        }
                    }
                    Inbound::Command { id, command, reply } => {
                        if pilot == Some(id) {
                            core.submit(command);
                        } else {
                            let _ = reply.try_send(ServerMessage::error("observers have no command authority").to_json());
                        }
                    }
                }
            }
            _ = clock.tick() => {
                if pilot.is_none() {
                    continue;
                }
                for msg in core.tick() {
                    // no receivers is fine; frames are simply dropped
                    let _ = outbound.send(msg.to_json().into());
                }
                if core.finished() {
                    break;
                }
            }
        }
    }
    core.metrics().clone()
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| handle_socket(socket, state))
}

async fn handle_socket(socket: WebSocket, state: AppState) {
    let id = state.next_id.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    // subscribe before joining so no frame after the hello is missed
    let mut frames = state.outbound.subscribe();
    let (reply_tx, reply_rx) = oneshot::channel();
    if state.inbound.send(Inbound::Join { id, reply: reply_tx }).await.is_err() {
        return;
    }
    let Ok(greeting) = reply_rx.await else { return };

    let (mut sink, mut stream) = socket.split();
    let (direct_tx, mut direct_rx) = mpsc::channel::<String>(16);
    let writer = tokio::spawn(async move {
        for text in greeting {
            if sink.send(Message::Text(text.into())).await.is_err() {
                return;
            }
        }
        loop {
            let text: String = tokio::select! {
                direct = direct_rx.recv() => match direct {
                    Some(t) => t,
                    None => break,
                },
                frame = frames.recv() => match frame {
                    Ok(t) => t.to_string(),
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => break,
                },
            };
            let is_result = text.contains(r#""type":"result""#);
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
            if is_result {
                let _ = sink.send(Message::Close(None)).await;
                break;
            }
        }
    });

    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Close(_) => break,
            Message::Binary(_) => {
                let _ = direct_tx.try_send(ServerMessage::error("binary frames are not supported").to_json());
                continue;
            }
            _ => continue,
        };
        match messages::parse_client(&text) {
            Ok(ClientMessage::Hello { .. }) => {}
            Ok(ClientMessage::Command { command, .. }) => {
                let msg = Inbound::Command {
                    id,
                    command,
                    reply: direct_tx.clone(),
                };
                if state.inbound.send(msg).await.is_err() {
                    break;
                }
            }
            Err(e) => {
                let _ = direct_tx.try_send(ServerMessage::error(e).to_json());
            }
        }
    }
    let _ = state.inbound.send(Inbound::Leave { id }).await;
    drop(direct_tx);
    let _ = writer.await;
}
