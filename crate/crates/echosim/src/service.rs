//! The session service: one stepper task owns the training session and
//! fans immutable messages out to per-client queues; WebSocket writers
//! drain those queues at their own pace.

use std::collections::{BTreeMap, VecDeque};
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use base64::Engine as _;
use echosim_core::quizbank::{default_bank, QuizBank};
use echosim_core::session::ViewTable;
use echosim_core::telemetry::{to_pose, CalibrationConfig, DEFAULT_SAMPLE_HZ};
use echosim_core::{
    calibrate, slice, tilted_plane, AssetKey, Calibration, HallConfig, ProbePose, ProbeSample, Session,
    SessionConfig, SlicePlane, TelemetryError, Variant, View, VolumeSequence,
};
use futures::{SinkExt, StreamExt};
use log::{debug, info, warn};
use thiserror::Error;
use tokio::sync::{mpsc, oneshot, Notify};
use tokio::task::JoinHandle;
use tokio::time::Instant;

use crate::assets::LoadedAssets;
use crate::protocol::{CalibrationPhase, ClientMessage, ErrorCode, ServerMessage, StateUpdate};
use crate::source::{read_replay, read_serial, SourceError, TelemetrySource};

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_QUEUE_CAPACITY: usize = 64;
pub const HEARTBEAT: Duration = Duration::from_secs(5);
const TICK: Duration = Duration::from_millis(10);

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error("target {view}:{} is not in the view table", variant.key())]
    UnknownTarget { view: View, variant: Variant },
}

/// Volume and planes for live slicing alongside the preloaded clips.
#[derive(Debug, Clone)]
pub struct RealtimeVolume {
    pub sequence: VolumeSequence,
    pub planes: BTreeMap<View, SlicePlane>,
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub bind: IpAddr,
    pub port: u16,
    pub source: TelemetrySource,
    pub session: SessionConfig,
    pub hall: HallConfig,
    pub calibration: Calibration,
    pub calibration_cfg: CalibrationConfig,
    pub table: ViewTable,
    pub bank: QuizBank,
    pub target: (View, Variant),
    pub queue_capacity: usize,
    pub heartbeat: Duration,
    pub realtime: Option<RealtimeVolume>,
    pub static_dir: Option<PathBuf>,
    /// Hold replay playback until the first client connects.
    pub replay_waits_for_client: bool,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: DEFAULT_PORT,
            source: TelemetrySource::Virtual,
            session: SessionConfig::default(),
            hall: HallConfig::default(),
            calibration: Calibration::identity(),
            calibration_cfg: CalibrationConfig::default(),
            table: ViewTable::default(),
            bank: default_bank(),
            target: (View::Apical, Variant::Tilt),
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            heartbeat: HEARTBEAT,
            realtime: None,
            static_dir: None,
            replay_waits_for_client: true,
        }
    }
}

/// Bounded outbound queue for one client. When full, the oldest frame
/// message is dropped; state and other messages are never dropped. A
/// client that lets undroppable messages pile past four times the
/// capacity is disconnected rather than allowed to grow without bound.
#[derive(Debug)]
pub struct ClientQueue {
    inner: Mutex<VecDeque<ServerMessage>>,
    notify: Notify,
    capacity: usize,
    closed: AtomicBool,
    dropped: AtomicU64,
}

impl ClientQueue {
    pub fn new(capacity: usize) -> Self {
        Self {
            inner: Mutex::new(VecDeque::with_capacity(capacity)),
            notify: Notify::new(),
            capacity: capacity.max(1),
            closed: AtomicBool::new(false),
            dropped: AtomicU64::new(0),
        }
    }

    /// Enqueues without blocking. Returns false once the queue is closed.
    pub fn push(&self, msg: ServerMessage) -> bool {
        if self.is_closed() {
            return false;
        }
        let mut q = self.inner.lock().expect("queue lock");
        if q.len() >= self.capacity {
            if let Some(i) = q.iter().position(ServerMessage::is_droppable) {
                q.remove(i);
                self.dropped.fetch_add(1, Ordering::Relaxed);
            } else if msg.is_droppable() {
                self.dropped.fetch_add(1, Ordering::Relaxed);
                return true;
            }
        }
        if q.len() >= self.capacity * 4 {
            q.push_back(ServerMessage::error(ErrorCode::SlowClient, "outbound queue overflowed"));
            drop(q);
            self.close();
            return false;
        }
        q.push_back(msg);
        drop(q);
        self.notify.notify_one();
        true
    }

    pub fn pop(&self) -> Option<ServerMessage> {
        self.inner.lock().expect("queue lock").pop_front()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("queue lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn close(&self) {
        self.closed.store(true, Ordering::Release);
        self.notify.notify_one();
    }

    pub fn is_closed(&self) -> bool {
        self.closed.load(Ordering::Acquire)
    }

    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }

    pub async fn wait(&self) {
        self.notify.notified().await
    }
}

enum Input {
    Connect { id: u64, queue: Arc<ClientQueue> },
    Disconnect { id: u64 },
    Client { id: u64, msg: ClientMessage },
    Sample(ProbeSample),
    SourceDone,
}

struct CalibrationRun {
    started: Instant,
    samples: Vec<ProbeSample>,
    announced: u64,
}

struct Stepper {
    cfg: ServeConfig,
    assets: Arc<LoadedAssets>,
    session: Session,
    clients: BTreeMap<u64, Arc<ClientQueue>>,
    seq: u64,
    pose: Option<ProbePose>,
    last_sample: Option<(u64, Instant)>,
    virtual_pose: Option<(ProbePose, Instant)>,
    clock: Instant,
    shown: Option<(AssetKey, usize)>,
    slice_shown: Option<(View, usize)>,
    calibrating: Option<CalibrationRun>,
    first_client: Arc<Notify>,
}

impl Stepper {
    fn visual(&self) -> Option<AssetKey> {
        self.pose.as_ref().and_then(|p| self.session.select_visualization(p))
    }

    fn snapshot(&self) -> ServerMessage {
        ServerMessage::StateUpdate(StateUpdate::from_state(self.seq, self.session.state(), self.visual()))
    }

    fn broadcast(&mut self, msg: &ServerMessage) {
        self.clients.retain(|id, q| {
            let ok = q.push(msg.clone());
            if !ok {
                warn!("client {id} fell too far behind; disconnecting");
            }
            ok
        });
    }

    fn send_to(&mut self, id: u64, msg: ServerMessage) {
        if let Some(q) = self.clients.get(&id) {
            q.push(msg);
        }
    }

    fn publish_state(&mut self, events: &[echosim_core::FeedbackEvent]) {
        let visual = self.visual();
        let state = self.session.state().clone();
        if events.is_empty() {
            self.seq += 1;
            let msg = ServerMessage::StateUpdate(StateUpdate::from_state(self.seq, &state, visual));
            self.broadcast(&msg);
            return;
        }
        // One update per event, carrying the displayed stage right after it.
        let entries = &state.feedback[state.feedback.len() - events.len()..];
        for e in entries {
            self.seq += 1;
            let mut u = StateUpdate::from_state(self.seq, &state, visual);
            u.feedback_event = Some(e.event);
            u.stage_max = e.stage;
            u.completed = state.completed && e.stage == 3;
            self.broadcast(&ServerMessage::StateUpdate(u));
        }
    }

    fn apply(&mut self, pose: ProbePose, dt_ms: f64) {
        let before_visual = self.visual();
        self.pose = Some(pose);
        let out = self.session.step(&pose, dt_ms);
        if out.changed || self.visual() != before_visual {
            for e in &out.events {
                info!("{} at stage {}", e, self.session.state().stage_max);
            }
            self.publish_state(&out.events);
        }
    }

    fn on_sample(&mut self, s: ProbeSample) {
        if let Some(run) = &mut self.calibrating {
            run.samples.push(s);
        }
        let period = 1000.0 / DEFAULT_SAMPLE_HZ;
        let dt = match self.last_sample {
            Some((prev, _)) if s.seq > prev => ((s.seq - prev) as f64 * period).min(1000.0),
            _ => period,
        };
        if let Some((prev, _)) = self.last_sample {
            if s.seq > prev + 1 {
                debug!("telemetry gap: {} samples lost", s.seq - prev - 1);
            }
        }
        self.last_sample = Some((s.seq, Instant::now()));
        let pose = to_pose(&s, &self.cfg.calibration, &self.cfg.hall);
        self.apply(pose, dt);
    }

    fn target_spec(&self, view: View, variant: Variant) -> Option<echosim_core::ViewSpec> {
        let mut spec = *self.cfg.table.get(view, variant)?;
        if let Some(s) = self.assets.sensor_for(view) {
            spec.sensor_index = s;
        }
        Some(spec)
    }

    fn on_client(&mut self, id: u64, msg: ClientMessage) {
        match msg {
            ClientMessage::SelectTarget { view, variant } => match self.target_spec(view, variant) {
                Some(spec) => {
                    self.session.select_target(spec);
                    self.publish_state(&[]);
                }
                None => self.send_to(id, ServerMessage::error(ErrorCode::UnknownTarget, format!("{view}:{}", variant.key()))),
            },
            ClientMessage::VirtualProbe { yaw, pitch, roll, contacts } => {
                if self.cfg.source != TelemetrySource::Virtual {
                    let detail = format!("virtual probe input rejected while {} is attached", self.cfg.source);
                    self.send_to(id, ServerMessage::error(ErrorCode::SourceConflict, detail));
                    return;
                }
                let pose = ProbePose::new(yaw, pitch, roll, contacts);
                let now = Instant::now();
                let dt = self.virtual_pose.map_or(0.0, |(_, t)| (now - t).as_secs_f64() * 1000.0).min(1000.0);
                self.virtual_pose = Some((pose, now));
                self.apply(pose, dt);
            }
            ClientMessage::StartCalibration {} => {
                if self.cfg.source == TelemetrySource::Virtual {
                    // The virtual probe reports calibrated angles already.
                    self.send_to(id, ServerMessage::CalibrationStatus { phase: CalibrationPhase::Done, seconds_remaining: 0.0 });
                    return;
                }
                self.calibrating = Some(CalibrationRun { started: Instant::now(), samples: Vec::new(), announced: u64::MAX });
            }
            ClientMessage::ResetAttempt {} => {
                self.session.reset_attempt();
                self.publish_state(&[]);
            }
            ClientMessage::QuizAnswer { item_id, choice } => {
                let reply = match self.cfg.bank.check(&item_id, choice) {
                    Some(Ok((correct, explanation))) => {
                        ServerMessage::QuizResult { item_id, correct, explanation: explanation.to_owned() }
                    }
                    Some(Err(e)) => ServerMessage::error(ErrorCode::BadMessage, e.to_string()),
                    None => ServerMessage::error(ErrorCode::UnknownItem, item_id),
                };
                self.send_to(id, reply);
            }
        }
    }

    fn tick_calibration(&mut self) {
        let Some(run) = &mut self.calibrating else { return };
        let window = self.cfg.calibration_cfg.window_s;
        let elapsed = run.started.elapsed().as_secs_f64();
        if elapsed < window {
            let remaining = (window - elapsed).ceil() as u64;
            if remaining != run.announced {
                run.announced = remaining;
                self.broadcast(&ServerMessage::CalibrationStatus {
                    phase: CalibrationPhase::Collecting,
                    seconds_remaining: remaining as f64,
                });
            }
            return;
        }
        let run = self.calibrating.take().expect("calibration run");
        match calibrate(run.samples, &self.cfg.calibration_cfg) {
            Ok(cal) => {
                info!("calibrated: {cal:?}");
                self.cfg.calibration = cal;
                self.broadcast(&ServerMessage::CalibrationStatus { phase: CalibrationPhase::Done, seconds_remaining: 0.0 });
            }
            Err(e) => {
                let code = if matches!(e, TelemetryError::NotStill { .. }) { ErrorCode::NotStill } else { ErrorCode::BadMessage };
                self.broadcast(&ServerMessage::CalibrationStatus { phase: CalibrationPhase::Failed, seconds_remaining: 0.0 });
                self.broadcast(&ServerMessage::error(code, e.to_string()));
            }
        }
    }

    fn tick_playback(&mut self) {
        let visual = self.visual();
        let now_ms = self.clock.elapsed().as_secs_f64() * 1000.0;
        let frame = visual.and_then(|key| {
            let (key, clip) = self.assets.resolve(key)?;
            let period_ms = clip.frames()[0].delay_cs as f64 * 10.0;
            let index = (now_ms / period_ms) as usize % clip.frame_count();
            Some((key, index, clip.frame_count()))
        });
        if let Some((key, index, count)) = frame {
            if self.shown != Some((key, index)) {
                self.shown = Some((key, index));
                self.broadcast(&ServerMessage::FrameRef { asset_key: key, frame_index: index, frame_count: count });
            }
        } else {
            self.shown = None;
        }

        let (Some(rt), Some(key), Some(pose)) = (&self.cfg.realtime, visual, self.pose) else {
            self.slice_shown = None;
            return;
        };
        let Some(base) = rt.planes.get(&key.view) else { return };
        let t = (now_ms / rt.sequence.frame_period_ms()) as usize % rt.sequence.len();
        if self.slice_shown == Some((key.view, t)) {
            return;
        }
        self.slice_shown = Some((key.view, t));
        let plane = tilted_plane(base, pose.pitch_deg);
        let img = slice(&rt.sequence.frames()[t], &plane);
        let pixels = base64::engine::general_purpose::STANDARD.encode(&img.pixels);
        self.broadcast(&ServerMessage::SliceFrame { width: img.width, height: img.height, pixels, t });
    }

    fn tick(&mut self) {
        if let Some((pose, at)) = self.virtual_pose {
            let now = Instant::now();
            let dt = (now - at).as_secs_f64() * 1000.0;
            if dt >= 20.0 {
                self.virtual_pose = Some((pose, now));
                self.apply(pose, dt.min(1000.0));
            }
        }
        self.tick_calibration();
        self.tick_playback();
    }

    async fn run(mut self, mut inputs: mpsc::Receiver<Input>, mut shutdown: oneshot::Receiver<()>) {
        let mut ticker = tokio::time::interval(TICK);
        ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
        loop {
            tokio::select! {
                _ = &mut shutdown => break,
                _ = ticker.tick() => self.tick(),
                input = inputs.recv() => match input {
                    None => break,
                    Some(Input::Connect { id, queue }) => {
                        queue.push(self.snapshot());
                        if self.clients.is_empty() {
                            self.first_client.notify_one();
                        }
                        self.clients.insert(id, queue);
                        info!("client {id} connected");
                    }
                    Some(Input::Disconnect { id }) => {
                        if let Some(q) = self.clients.remove(&id) {
                            q.close();
                        }
                        info!("client {id} disconnected");
                    }
                    Some(Input::Client { id, msg }) => self.on_client(id, msg),
                    Some(Input::Sample(s)) => self.on_sample(s),
                    Some(Input::SourceDone) => info!("telemetry source finished"),
                },
            }
        }
        for q in self.clients.values() {
            q.close();
        }
    }
}

struct App {
    inputs: mpsc::Sender<Input>,
    next_id: AtomicU64,
    queue_capacity: usize,
    heartbeat: Duration,
    assets: Arc<LoadedAssets>,
    bank: QuizBank,
    static_dir: Option<PathBuf>,
}

/// A listening service. Dropping it leaves the server running until the
/// runtime stops; call [`RunningServer::shutdown`] to stop it.
pub struct RunningServer {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    stepper_shutdown: Option<oneshot::Sender<()>>,
    handle: JoinHandle<()>,
    tasks: Vec<JoinHandle<()>>,
}

impl RunningServer {
    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(tx) = self.stepper_shutdown.take() {
            let _ = tx.send(());
        }
        for t in &self.tasks {
            t.abort();
        }
        let _ = (&mut self.handle).await;
    }

    /// Runs until the HTTP server exits.
    pub async fn wait(self) {
        let _ = self.handle.await;
    }
}

fn spawn_source(cfg: &ServeConfig, tx: mpsc::Sender<Input>, first_client: Arc<Notify>) -> Result<Option<JoinHandle<()>>, ServeError> {
    match &cfg.source {
        TelemetrySource::Virtual => Ok(None),
        TelemetrySource::Replay(path) => {
            let samples = read_replay(path)?;
            let wait = cfg.replay_waits_for_client;
            info!("replaying {} samples from {}", samples.len(), path.display());
            Ok(Some(tokio::spawn(async move {
                if wait {
                    first_client.notified().await;
                }
                let mut ticker = tokio::time::interval(Duration::from_secs_f64(1.0 / DEFAULT_SAMPLE_HZ));
                for s in samples {
                    ticker.tick().await;
                    if tx.send(Input::Sample(s)).await.is_err() {
                        return;
                    }
                }
                let _ = tx.send(Input::SourceDone).await;
            })))
        }
        TelemetrySource::Serial(dev) => {
            let dev = dev.clone();
            Ok(Some(tokio::task::spawn_blocking(move || {
                if let Err(e) = read_serial(&dev, |s| tx.blocking_send(Input::Sample(s)).is_ok()) {
                    warn!("{e}");
                }
                let _ = tx.blocking_send(Input::SourceDone);
            })))
        }
    }
}

/// Binds the port and starts the stepper, telemetry ingest and HTTP server.
pub async fn serve(cfg: ServeConfig, assets: LoadedAssets) -> Result<RunningServer, ServeError> {
    let (view, variant) = cfg.target;
    let assets = Arc::new(assets);
    let mut spec = *cfg.table.get(view, variant).ok_or(ServeError::UnknownTarget { view, variant })?;
    if let Some(s) = assets.sensor_for(view) {
        spec.sensor_index = s;
    }

    let addr = SocketAddr::new(cfg.bind, cfg.port);
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| match source.kind() {
        std::io::ErrorKind::AddrInUse => ServeError::PortInUse(cfg.port),
        _ => ServeError::Bind { addr, source },
    })?;
    let local = listener.local_addr().map_err(|source| ServeError::Bind { addr, source })?;

    let (tx, rx) = mpsc::channel(1024);
    let first_client = Arc::new(Notify::new());
    let mut tasks = Vec::new();
    if let Some(t) = spawn_source(&cfg, tx.clone(), first_client.clone())? {
        tasks.push(t);
    }

    let stepper = Stepper {
        session: Session::new(spec, cfg.session),
        assets: assets.clone(),
        clients: BTreeMap::new(),
        seq: 0,
        pose: None,
        last_sample: None,
        virtual_pose: None,
        clock: Instant::now(),
        shown: None,
        slice_shown: None,
        calibrating: None,
        first_client,
        cfg: cfg.clone(),
    };
    let (stepper_tx, stepper_rx) = oneshot::channel();
    tasks.push(tokio::spawn(stepper.run(rx, stepper_rx)));

    let app = Arc::new(App {
        inputs: tx,
        next_id: AtomicU64::new(1),
        queue_capacity: cfg.queue_capacity,
        heartbeat: cfg.heartbeat,
        assets,
        bank: cfg.bank.clone(),
        static_dir: cfg.static_dir.clone(),
    });
    let router = Router::new()
        .route("/ws", get(ws_handler))
        .route("/manifest", get(manifest_handler))
        .route("/quiz", get(quiz_handler))
        .route("/assets/{name}", get(asset_handler))
        .fallback(static_handler)
        .with_state(app);

    let (shutdown_tx, shutdown_rx) = oneshot::channel::<()>();
    info!("listening on {local} (telemetry {})", cfg.source);
    let handle = tokio::spawn(async move {
        let server = axum::serve(listener, router).with_graceful_shutdown(async {
            let _ = shutdown_rx.await;
        });
        if let Err(e) = server.await {
            warn!("server error: {e}");
        }
    });
    Ok(RunningServer {
        addr: local,
        shutdown: Some(shutdown_tx),
        stepper_shutdown: Some(stepper_tx),
        handle,
        tasks,
    })
}

async fn ws_handler(ws: WebSocketUpgrade, State(app): State<Arc<App>>) -> Response {
    ws.on_upgrade(move |socket| client_session(socket, app))
}

async fn client_session(socket: WebSocket, app: Arc<App>) {
    let id = app.next_id.fetch_add(1, Ordering::Relaxed);
    let queue = Arc::new(ClientQueue::new(app.queue_capacity));
    if app.inputs.send(Input::Connect { id, queue: queue.clone() }).await.is_err() {
        return;
    }
    let (mut sink, mut stream) = socket.split();
    let writer_queue = queue.clone();
    let heartbeat = app.heartbeat;
    let writer = tokio::spawn(async move {
        let mut beat = tokio::time::interval_at(Instant::now() + heartbeat, heartbeat);
        loop {
            while let Some(msg) = writer_queue.pop() {
                if sink.send(Message::Text(msg.to_line().into())).await.is_err() {
                    return;
                }
            }
            if writer_queue.is_closed() {
                let _ = sink.close().await;
                return;
            }
            tokio::select! {
                _ = writer_queue.wait() => {}
                _ = beat.tick() => {
                    if sink.send(Message::Ping(Vec::new().into())).await.is_err() {
                        return;
                    }
                }
            }
        }
    });

    while let Some(Ok(frame)) = stream.next().await {
        match frame {
            Message::Text(text) => match serde_json::from_str::<ClientMessage>(text.as_str()) {
                Ok(msg) => {
                    if app.inputs.send(Input::Client { id, msg }).await.is_err() {
                        break;
                    }
                }
                Err(e) => {
                    queue.push(ServerMessage::error(ErrorCode::BadMessage, e.to_string()));
                }
            },
            Message::Close(_) => break,
            _ => {}
        }
    }
    let _ = app.inputs.send(Input::Disconnect { id }).await;
    queue.close();
    let _ = writer.await;
}

async fn manifest_handler(State(app): State<Arc<App>>) -> Response {
    Json(app.assets.manifest().clone()).into_response()
}

async fn quiz_handler(State(app): State<Arc<App>>) -> Response {
    Json(app.bank.clone()).into_response()
}

async fn asset_handler(State(app): State<Arc<App>>, UrlPath(name): UrlPath<String>) -> Response {
    let listed = app.assets.manifest().entries.values().any(|e| e.gif_path == name);
    if !listed {
        return StatusCode::NOT_FOUND.into_response();
    }
    match tokio::fs::read(app.assets.dir().join(&name)).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, "image/gif")], bytes).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("gif") => "image/gif",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

async fn static_handler(State(app): State<Arc<App>>, uri: Uri) -> Response {
    let Some(root) = &app.static_dir else {
        return StatusCode::NOT_FOUND.into_response();
    };
    let rel = uri.path().trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    let rel = Path::new(rel);
    if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return StatusCode::NOT_FOUND.into_response();
    }
    let path = root.join(rel);
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}
