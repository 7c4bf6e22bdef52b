//! HTTP and WebSocket front end.
//!
//! - `GET /levels`: `[{"id": ...}, ...]`
//! - `GET /levels/{id}`: the level document
//! - `GET /session`: WebSocket upgrade; one session per connection
//! - anything else: static files from the configured directory, if any

use crate::outbox::Outbox;
use crate::registry::LevelRegistry;
use crate::runner::SessionRunner;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use futures_util::stream::{SplitSink, SplitStream};
use futures_util::{SinkExt, StreamExt};
use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};
use tokio::net::TcpListener;
use tokio::sync::watch;
use tokio::time::{self, MissedTickBehavior};
use tower_http::services::ServeDir;
use wheelsim_core::protocol::{decode, encode, ErrorCode, WireMessage};
use wheelsim_core::{ChairParams, EndReason, SessionConfig};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub params: ChairParams,
    pub session: SessionConfig,
    /// Publish a frame every this many ticks (plus every tick with events).
    pub frame_every: u64,
    /// Wall-clock pacing factor; 1.0 runs the simulation in real time.
    pub speedup: f64,
    /// How long to keep reading after `Ended` before closing.
    pub linger: Duration,
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            params: ChairParams::default(),
            session: SessionConfig::default(),
            frame_every: 2,
            speedup: 1.0,
            linger: Duration::from_secs(1),
            static_dir: None,
        }
    }
}

impl ServiceConfig {
    fn tick_period(&self) -> Duration {
        Duration::from_secs_f64(self.session.dt / self.speedup.max(1e-6))
            .max(Duration::from_nanos(1))
    }
}

#[derive(Clone)]
struct AppState {
    registry: Arc<LevelRegistry>,
    config: Arc<ServiceConfig>,
    shutdown: watch::Receiver<bool>,
}

pub fn router(
    registry: Arc<LevelRegistry>,
    config: ServiceConfig,
    shutdown: watch::Receiver<bool>,
) -> Router {
    let static_dir = config.static_dir.clone();
    let state = AppState {
        registry,
        config: Arc::new(config),
        shutdown,
    };
    let app = Router::new()
        .route("/levels", get(list_levels))
        .route("/levels/{id}", get(get_level))
        .route("/session", get(session_upgrade))
        .with_state(state);
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

/// Serves until `signal` resolves, then ends every open session (each
/// client receives `Ended`) and returns once connections have closed.
pub async fn serve(
    listener: TcpListener,
    registry: LevelRegistry,
    config: ServiceConfig,
    signal: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let (tx, rx) = watch::channel(false);
    let app = router(Arc::new(registry), config, rx);
    axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            signal.await;
            tracing::info!("shutting down; ending open sessions");
            let _ = tx.send(true);
        })
        .await
}

async fn list_levels(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::Value::Array(
        state
            .registry
            .ids()
            .map(|id| serde_json::json!({ "id": id }))
            .collect(),
    ))
}

async fn get_level(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.registry.get(&id) {
        Some(level) => Json(level.as_ref().clone()).into_response(),
        None => (
            StatusCode::NOT_FOUND,
            Json(serde_json::json!({ "error": format!("no level {id:?}") })),
        )
            .into_response(),
    }
}

async fn session_upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| run_connection(socket, state))
}

async fn wait_shutdown(rx: &mut watch::Receiver<bool>) {
    loop {
        if *rx.borrow_and_update() {
            return;
        }
        if rx.changed().await.is_err() {
            return;
        }
    }
}

async fn write_loop(mut sink: SplitSink<WebSocket, Message>, outbox: Arc<Outbox>) {
    while let Some(msg) = outbox.next().await {
        if sink.send(Message::Text(encode(&msg).into())).await.is_err() {
            return;
        }
    }
    let _ = sink.send(Message::Close(None)).await;
    let _ = sink.close().await;
}

fn bad_message(message: impl Into<String>) -> WireMessage {
    WireMessage::error(ErrorCode::BadMessage, message)
}

async fn run_connection(socket: WebSocket, state: AppState) {
    let (sink, mut stream) = socket.split();
    let outbox = Arc::new(Outbox::new());
    let writer = tokio::spawn(write_loop(sink, outbox.clone()));
    let mut shutdown = state.shutdown.clone();

    let runner = loop {
        let msg = tokio::select! {
            biased;
            _ = wait_shutdown(&mut shutdown) => None,
            msg = stream.next() => msg,
        };
        match msg {
            Some(Ok(Message::Text(text))) => match decode(&text) {
                Ok(WireMessage::Hello(hello)) => {
                    let cfg = &state.config;
                    match SessionRunner::start(
                        &state.registry,
                        hello,
                        cfg.params,
                        cfg.session,
                        cfg.frame_every,
                    ) {
                        Ok((runner, welcome)) => {
                            outbox.push(welcome);
                            break Some(runner);
                        }
                        Err(err) => outbox.push(WireMessage::Error(err)),
                    }
                }
                Ok(other) => {
                    outbox.push(bad_message(format!("expected hello, got {}", other.kind())))
                }
                Err(e) => outbox.push(bad_message(e.to_string())),
            },
            Some(Ok(Message::Binary(_))) => {
                outbox.push(bad_message("binary frames are not supported"))
            }
            Some(Ok(Message::Ping(_) | Message::Pong(_))) => {}
            Some(Ok(Message::Close(_)) | Err(_)) | None => break None,
        }
    };

    if let Some(runner) = runner {
        tracing::debug!(level = %runner.session().level().id, "session started");
        run_session_loop(runner, &mut stream, &outbox, &state, &mut shutdown).await;
    }
    outbox.close();
    let _ = writer.await;
}

async fn run_session_loop(
    mut runner: SessionRunner,
    stream: &mut SplitStream<WebSocket>,
    outbox: &Outbox,
    state: &AppState,
    shutdown: &mut watch::Receiver<bool>,
) {
    // Tick k runs once its interval [(k-1)dt, k dt) has elapsed, so an input
    // stamped at the start of that interval has one tick to arrive.
    let period = state.config.tick_period();
    let mut interval = time::interval_at(time::Instant::now() + period, period);
    interval.set_missed_tick_behavior(MissedTickBehavior::Burst);
    let mut connected = true;

    while !runner.is_ended() {
        tokio::select! {
            biased;
            _ = wait_shutdown(shutdown) => {
                runner.end(EndReason::ServerShutdown);
            }
            msg = stream.next() => match msg {
                Some(Ok(Message::Text(text))) => match decode(&text) {
                    Ok(WireMessage::Input(input)) => {
                        if let Err(err) = runner.on_input(&input) {
                            outbox.push(WireMessage::Error(err));
                        }
                    }
                    Ok(WireMessage::End {}) => {
                        runner.end(EndReason::ClientEnded);
                    }
                    Ok(other) => outbox.push(bad_message(format!("unexpected {} during a session", other.kind()))),
                    Err(e) => outbox.push(bad_message(e.to_string())),
                },
                Some(Ok(Message::Binary(_))) => outbox.push(bad_message("binary frames are not supported")),
                Some(Ok(Message::Ping(_) | Message::Pong(_))) => {}
                Some(Ok(Message::Close(_)) | Err(_)) | None => {
                    connected = false;
                    runner.end(EndReason::Disconnected);
                }
            },
            _ = interval.tick() => {
                if let Some(frame) = runner.on_tick() {
                    outbox.push_frame(frame);
                }
            }
        }
    }

    let Some(report) = runner.report() else {
        return;
    };
    tracing::debug!(
        reason = ?report.end_reason,
        ticks = report.metrics.ticks,
        dropped_frames = outbox.dropped_frames(),
        "session ended"
    );
    if !connected {
        return;
    }
    let now_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64);
    outbox.push(WireMessage::ended(report.stamped(now_ms)));

    // Let the client read the report and hang up; late messages get session_ended.
    let _ = time::timeout(state.config.linger, async {
        while let Some(Ok(msg)) = stream.next().await {
            match msg {
                Message::Text(_) | Message::Binary(_) => outbox.push(WireMessage::error(
                    ErrorCode::SessionEnded,
                    "session has ended",
                )),
                Message::Close(_) => break,
                _ => {}
            }
        }
    })
    .await;
}
