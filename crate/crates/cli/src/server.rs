//! WebSocket endpoint serving one of the three session modes.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::broadcast;

use racil_core::train::{ActorPolicy, Checkpoint, Policy, ScriptedPolicy, TrainConfig};

use crate::protocol::{parse_client, ClientMsg, Mode, ServerMsg, StateFrame, SCHEMA_VERSION};
use crate::session::{PilotSession, ReplaySession, WatchRunner};

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub mode: Mode,
    pub config: TrainConfig,
    /// Policy flown in watch mode; the scripted expert when absent.
    pub checkpoint: Option<Checkpoint>,
    /// Frames played back in replay mode.
    pub frames: Vec<StateFrame>,
    /// Where the pilot's `save` command writes.
    pub demos_out: PathBuf,
    pub hz: f64,
    pub seed: u64,
}

struct AppState {
    opts: ServeOptions,
    pilot_taken: AtomicBool,
    watch: broadcast::Sender<String>,
}

struct PilotSlot<'a>(&'a AtomicBool);

impl Drop for PilotSlot<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::SeqCst);
    }
}

fn tick_period(hz: f64) -> Duration {
    Duration::from_secs_f64(1.0 / hz.max(0.1))
}

/// Serve on an already-bound listener until the task is dropped.
pub async fn serve(listener: TcpListener, opts: ServeOptions) -> anyhow::Result<()> {
    if opts.mode == Mode::Replay && opts.frames.is_empty() {
        anyhow::bail!("replay mode needs a trajectory");
    }
    let (watch, _) = broadcast::channel(64);
    if opts.mode == Mode::Watch {
        let policy: Box<dyn Policy + Send> = match &opts.checkpoint {
            Some(ck) => Box::new(ActorPolicy::from_checkpoint(ck, opts.config.observation())),
            None => Box::new(ScriptedPolicy { sensor: opts.config.sensor.clone() }),
        };
        let mut runner = WatchRunner::new(opts.config.env.clone(), opts.config.sensor.clone(), policy, opts.seed)?;
        let tx = watch.clone();
        let period = tick_period(opts.hz);
        tokio::spawn(async move {
            let mut interval = tokio::time::interval(period);
            loop {
                interval.tick().await;
                match runner.tick() {
                    Ok(frame) => {
                        let _ = tx.send(ServerMsg::State(frame).to_json());
                    }
                    Err(e) => {
                        log::error!("watch runner stopped: {e}");
                        break;
                    }
                }
            }
        });
    }
    let state = Arc::new(AppState { opts, pilot_taken: AtomicBool::new(false), watch });
    let app = Router::new().route("/", get(index)).route("/ws", get(upgrade)).with_state(state);
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}

async fn index(State(state): State<Arc<AppState>>) -> impl IntoResponse {
    format!("racil session server ({} mode); connect a client to /ws\n", state.opts.mode.name())
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<Arc<AppState>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| async move {
        if let Err(e) = session(socket, state).await {
            log::debug!("connection ended: {e}");
        }
    })
}

async fn send(socket: &mut WebSocket, msg: &ServerMsg) -> Result<(), axum::Error> {
    socket.send(Message::Text(msg.to_json().into())).await
}

/// Next client message, `None` once the peer has gone. Malformed input is
/// answered in place.
async fn recv(socket: &mut WebSocket) -> Result<Option<ClientMsg>, axum::Error> {
    loop {
        match socket.recv().await {
            None | Some(Ok(Message::Close(_))) => return Ok(None),
            Some(Err(e)) => return Err(e),
            Some(Ok(Message::Text(text))) => match parse_client(text.as_str()) {
                Ok(msg) => return Ok(Some(msg)),
                Err(err) => send(socket, &err).await?,
            },
            Some(Ok(Message::Binary(_))) => send(socket, &ServerMsg::error("bad_message", "binary frames are not accepted")).await?,
            Some(Ok(_)) => {}
        }
    }
}

async fn session(mut socket: WebSocket, state: Arc<AppState>) -> Result<(), axum::Error> {
    let opts = &state.opts;
    match recv(&mut socket).await? {
        Some(ClientMsg::Hello { schema_version }) if schema_version == SCHEMA_VERSION => {}
        Some(ClientMsg::Hello { schema_version }) => {
            let msg = format!("server speaks schema {SCHEMA_VERSION}, client sent {schema_version}");
            send(&mut socket, &ServerMsg::error("schema_mismatch", msg)).await?;
            return socket.close().await;
        }
        Some(_) => {
            send(&mut socket, &ServerMsg::error("hello_required", "the first message must be hello")).await?;
            return socket.close().await;
        }
        None => return Ok(()),
    }
    let _slot = if opts.mode == Mode::Pilot {
        if state.pilot_taken.swap(true, Ordering::SeqCst) {
            send(&mut socket, &ServerMsg::Busy { message: "another pilot is connected".into() }).await?;
            return socket.close().await;
        }
        Some(PilotSlot(&state.pilot_taken))
    } else {
        None
    };
    let hello = ServerMsg::Hello { schema_version: SCHEMA_VERSION, mode: opts.mode, n_uavs: opts.config.env.n_uavs };
    send(&mut socket, &hello).await?;
    match opts.mode {
        Mode::Pilot => pilot(socket, opts).await,
        Mode::Replay => replay(socket, opts).await,
        Mode::Watch => watch(socket, state.watch.subscribe()).await,
    }
}

async fn pilot(mut socket: WebSocket, opts: &ServeOptions) -> Result<(), axum::Error> {
    let config = &opts.config;
    let mut s = match PilotSession::new(config.env.clone(), config.sensor.clone(), config.observation(), opts.seed, opts.demos_out.clone()) {
        Ok(s) => s,
        Err(e) => {
            send(&mut socket, &ServerMsg::error("internal", e.to_string())).await?;
            return socket.close().await;
        }
    };
    send(&mut socket, &s.frame()).await?;
    while let Some(msg) = recv(&mut socket).await? {
        for reply in s.handle(msg) {
            send(&mut socket, &reply).await?;
        }
    }
    s.discard_recording();
    Ok(())
}

async fn replay(mut socket: WebSocket, opts: &ServeOptions) -> Result<(), axum::Error> {
    let Ok(mut s) = ReplaySession::new(opts.frames.clone()) else {
        return socket.close().await;
    };
    send(&mut socket, &s.frame()).await?;
    let mut interval = tokio::time::interval(tick_period(opts.hz));
    loop {
        tokio::select! {
            msg = recv(&mut socket) => {
                let Some(msg) = msg? else { return Ok(()) };
                for reply in s.handle(msg) {
                    send(&mut socket, &reply).await?;
                }
            }
            _ = interval.tick(), if s.playing() => {
                if let Some(frame) = s.tick() {
                    send(&mut socket, &frame).await?;
                }
            }
        }
    }
}

async fn watch(socket: WebSocket, mut frames: broadcast::Receiver<String>) -> Result<(), axum::Error> {
    let (mut tx, mut rx) = socket.split();
    loop {
        tokio::select! {
            msg = rx.next() => match msg {
                None | Some(Ok(Message::Close(_))) => return Ok(()),
                Some(Err(e)) => return Err(e),
                Some(Ok(Message::Text(text))) => {
                    let reply = match parse_client(text.as_str()) {
                        Ok(_) => ServerMsg::error("wrong_mode", "watch mode is read-only"),
                        Err(err) => err,
                    };
                    tx.send(Message::Text(reply.to_json().into())).await?;
                }
                Some(Ok(_)) => {}
            },
            frame = frames.recv() => match frame {
                Ok(text) => tx.send(Message::Text(text.into())).await?,
                Err(broadcast::error::RecvError::Lagged(_)) => {}
                Err(broadcast::error::RecvError::Closed) => return Ok(()),
            },
        }
    }
}
