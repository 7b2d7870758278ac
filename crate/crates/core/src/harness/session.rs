use std::io;
use std::net::{Ipv4Addr, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};
use tungstenite::{Message, WebSocket};

use super::config::{ControllerKind, ScenarioConfig, ScenarioId};
use super::engine::{Engine, EngineError, TickRecord};
use crate::Axes;

pub const SNAPSHOT_VERSION: u32 = 1;

/// Operator console input. Targets are in metres, grasp in newtons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InputEvent {
    /// Missing coordinates keep their previous value.
    LeaderTargetMove {
        #[serde(default)]
        x: Option<f64>,
        #[serde(default)]
        y: Option<f64>,
        #[serde(default)]
        z: Option<f64>,
    },
    GraspLevel { grasp: f64 },
    /// Without `controller`, flips between TIC and IAC.
    ControllerToggle {
        #[serde(default)]
        controller: Option<ControllerKind>,
    },
    DelaySet { delay_ms: f64 },
    SceneSelect { scenario: ScenarioId },
    Pause,
    Resume,
    Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub v: u32,
    pub tick: u64,
    pub t: f64,
    pub x_l: [f64; 3],
    pub x: [f64; 3],
    pub tau: [f64; 3],
    pub l1: [f64; 3],
    pub f_env: [f64; 3],
    pub error: f64,
    pub controller: ControllerKind,
    pub scenario: ScenarioId,
    pub delay_ms: f64,
    pub paused: bool,
    pub ruptured: bool,
}

#[derive(Debug, Default)]
struct Pending {
    target: Option<[Option<f64>; 3]>,
    grasp: Option<f64>,
    controller: Option<ControllerKind>,
    delay: Option<f64>,
    scene: Option<ScenarioId>,
    paused: Option<bool>,
    reset: bool,
}

fn arr(a: &Axes) -> [f64; 3] {
    [a.x, a.y, a.z]
}

/// Engine plus coalesced input handling; independent of any socket.
pub struct Session {
    base: ScenarioConfig,
    engine: Engine,
    pending: Pending,
    paused: bool,
    idle: u64,
    target: Option<Axes>,
    last: Option<TickRecord>,
}

impl Session {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, EngineError> {
        let engine = Engine::new(cfg.clone())?;
        Ok(Self { base: cfg, engine, pending: Pending::default(), paused: false, idle: 0, target: None, last: None })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    /// Parse and queue one JSON message. Errors leave the session untouched.
    pub fn handle_message(&mut self, text: &str) -> Result<(), String> {
        let ev: InputEvent = serde_json::from_str(text).map_err(|e| format!("malformed input: {e}"))?;
        self.push(ev)
    }

    /// Queue an input for the next tick boundary; later inputs of the same
    /// kind replace earlier ones.
    pub fn push(&mut self, ev: InputEvent) -> Result<(), String> {
        let p = &mut self.pending;
        match ev {
            InputEvent::LeaderTargetMove { x, y, z } => {
                for v in [x, y, z].into_iter().flatten() {
                    if !v.is_finite() {
                        return Err("target coordinates must be finite".into());
                    }
                }
                let prev = p.target.unwrap_or([None; 3]);
                p.target = Some([x.or(prev[0]), y.or(prev[1]), z.or(prev[2])]);
            }
            InputEvent::GraspLevel { grasp } => {
                if !(grasp >= 0.0 && grasp.is_finite()) {
                    return Err(format!("grasp must be >= 0, got {grasp}"));
                }
                p.grasp = Some(grasp);
            }
            InputEvent::ControllerToggle { controller } => {
                let current = p.controller.unwrap_or(self.engine.controller());
                p.controller = Some(controller.unwrap_or(match current {
                    ControllerKind::Tic => ControllerKind::Iac,
                    _ => ControllerKind::Tic,
                }));
            }
            InputEvent::DelaySet { delay_ms } => {
                if !(delay_ms >= 0.0 && delay_ms.is_finite()) {
                    return Err(format!("delay must be >= 0 ms, got {delay_ms}"));
                }
                if self.base.bilateral && delay_ms != 0.0 {
                    return Err("bilateral scene requires zero delay".into());
                }
                p.delay = Some(delay_ms / 1000.0);
            }
            InputEvent::SceneSelect { scenario } => p.scene = Some(scenario),
            InputEvent::Pause => p.paused = Some(true),
            InputEvent::Resume => p.paused = Some(false),
            InputEvent::Reset => p.reset = true,
        }
        Ok(())
    }

    fn rebuild(&mut self, cfg: ScenarioConfig) -> Result<(), EngineError> {
        self.engine = Engine::new(cfg.clone())?;
        self.base = cfg;
        self.target = None;
        self.last = None;
        Ok(())
    }

    /// Returns whether anything was queued.
    fn apply_pending(&mut self) -> Result<bool, EngineError> {
        let p = std::mem::take(&mut self.pending);
        let any = p.scene.is_some()
            || p.reset
            || p.controller.is_some()
            || p.delay.is_some()
            || p.grasp.is_some()
            || p.target.is_some()
            || p.paused.is_some();
        if let Some(scene) = p.scene {
            let controller = p.controller.unwrap_or(self.engine.controller());
            let mut cfg = ScenarioConfig::preset(scene, controller);
            cfg.snapshot_every = self.base.snapshot_every;
            self.rebuild(cfg)?;
        } else if p.reset {
            let cfg = self.base.clone();
            self.rebuild(cfg)?;
        }
        if let Some(c) = p.controller {
            self.engine.set_controller(c);
        }
        if let Some(d) = p.delay {
            self.engine.set_delay(d)?;
        }
        if let Some(g) = p.grasp {
            self.engine.set_grasp_override(Some(g));
        }
        if let Some(t) = p.target {
            let cur = self.target.unwrap_or(self.engine.leader().position);
            let next = Axes::new(t[0].unwrap_or(cur.x), t[1].unwrap_or(cur.y), t[2].unwrap_or(cur.z));
            self.target = Some(next);
            self.engine.set_target_override(Some(next));
        }
        if let Some(pause) = p.paused {
            self.paused = pause;
        }
        Ok(any)
    }

    /// Apply queued inputs, advance one tick unless paused, and return a
    /// snapshot on decimated ticks. While paused, snapshots still go out
    /// after any input and at the same cadence.
    pub fn tick(&mut self) -> Result<Option<Snapshot>, EngineError> {
        let changed = self.apply_pending()?;
        if self.paused {
            self.idle = self.idle.wrapping_add(1);
            let due = changed || self.idle % self.base.snapshot_every == 0;
            return Ok(due.then(|| self.snapshot()));
        }
        let rec = self.engine.step()?;
        self.last = Some(rec);
        if rec.tick % self.base.snapshot_every == 0 {
            Ok(Some(self.snapshot()))
        } else {
            Ok(None)
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        let e = &self.engine;
        let (t, x_l, x, tau, l1, f_env, error, tick) = match &self.last {
            Some(r) => (r.row.t, r.row.x_l, r.row.x, r.row.tau, r.row.l1, r.row.f_env, r.row.error, r.tick),
            None => {
                let (xl, x) = (e.leader().position, e.follower().position);
                (e.time(), xl, x, xl, e.gains().l1, Axes::zeros(), (x - xl).norm(), e.tick())
            }
        };
        Snapshot {
            v: SNAPSHOT_VERSION,
            tick,
            t,
            x_l: arr(&x_l),
            x: arr(&x),
            tau: arr(&tau),
            l1: arr(&l1),
            f_env: arr(&f_env),
            error,
            controller: e.controller(),
            scenario: self.base.scenario,
            delay_ms: e.delta() * 1000.0,
            paused: self.paused,
            ruptured: e.contact().is_ruptured(),
        }
    }
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Outbound<'a> {
    Snapshot(&'a Snapshot),
    Error { v: u32, message: &'a str },
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(self) {
        self.stop.store(true, Ordering::SeqCst);
        self.join();
    }

    pub fn join(self) {
        for t in self.threads {
            let _ = t.join();
        }
    }
}

/// Serve a live session over a websocket on 127.0.0.1:`port` (0 = any).
/// The engine ticks in real time on its own thread; the socket thread
/// forwards inputs to it and snapshots back.
pub fn serve_session(cfg: ScenarioConfig, port: u16) -> Result<ServerHandle, EngineError> {
    let mut session = Session::new(cfg)?;
    let listener = TcpListener::bind(SocketAddr::from((Ipv4Addr::LOCALHOST, port)))
        .and_then(|l| l.set_nonblocking(true).map(|_| l))
        .map_err(|e| super::config::ConfigError::single("port", e.to_string()))?;
    let addr = listener.local_addr().map_err(|e| super::config::ConfigError::single("port", e.to_string()))?;
    let stop = Arc::new(AtomicBool::new(false));
    let (in_tx, in_rx) = mpsc::channel::<String>();
    let (out_tx, out_rx) = mpsc::channel::<String>();

    let engine_stop = stop.clone();
    let engine = thread::spawn(move || {
        let dt = Duration::from_secs_f64(session.engine().config().dt);
        let mut next = Instant::now();
        while !engine_stop.load(Ordering::SeqCst) {
            loop {
                match in_rx.try_recv() {
                    Ok(text) => {
                        if let Err(message) = session.handle_message(&text) {
                            let _ = out_tx.send(serde_json::to_string(&Outbound::Error { v: SNAPSHOT_VERSION, message: &message }).unwrap());
                        }
                    }
                    Err(TryRecvError::Empty) => break,
                    Err(TryRecvError::Disconnected) => return,
                }
            }
            match session.tick() {
                Ok(Some(snap)) => {
                    let _ = out_tx.send(serde_json::to_string(&Outbound::Snapshot(&snap)).unwrap());
                }
                Ok(None) => {}
                Err(e) => {
                    let message = e.to_string();
                    warn!("session engine stopped: {message}");
                    let _ = out_tx.send(serde_json::to_string(&Outbound::Error { v: SNAPSHOT_VERSION, message: &message }).unwrap());
                    session.push(InputEvent::Pause).ok();
                }
            }
            next += dt;
            let now = Instant::now();
            if next > now {
                thread::sleep(next - now);
            } else if now - next > Duration::from_millis(100) {
                // fell far behind; do not try to catch up
                next = now;
            }
        }
    });

    let sock_stop = stop.clone();
    let socket = thread::spawn(move || {
        while !sock_stop.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, peer)) => {
                    info!("console connected from {peer}");
                    if let Err(e) = client_loop(stream, &in_tx, &out_rx, &sock_stop) {
                        debug!("client loop ended: {e}");
                    }
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                    // drop snapshots nobody is listening to
                    while out_rx.try_recv().is_ok() {}
                    thread::sleep(Duration::from_millis(5));
                }
                Err(e) => {
                    warn!("accept failed: {e}");
                    thread::sleep(Duration::from_millis(50));
                }
            }
        }
    });

    Ok(ServerHandle { addr, stop, threads: vec![engine, socket] })
}

fn would_block(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if io.kind() == io::ErrorKind::WouldBlock)
}

fn client_loop(stream: TcpStream, in_tx: &Sender<String>, out_rx: &Receiver<String>, stop: &AtomicBool) -> Result<(), tungstenite::Error> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    let mut ws: WebSocket<TcpStream> = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => e,
        tungstenite::HandshakeError::Interrupted(_) => tungstenite::Error::ConnectionClosed,
    })?;
    ws.get_mut().set_nonblocking(true)?;
    while !stop.load(Ordering::SeqCst) {
        let mut idle = true;
        match ws.read() {
            Ok(Message::Text(t)) => {
                idle = false;
                if in_tx.send(t.to_string()).is_err() {
                    return Ok(());
                }
            }
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => idle = false,
            Err(e) if would_block(&e) => {}
            Err(e) => return Err(e),
        }
        loop {
            match out_rx.try_recv() {
                Ok(text) => {
                    idle = false;
                    match ws.send(Message::text(text)) {
                        Ok(()) => {}
                        Err(e) if would_block(&e) => {}
                        Err(e) => return Err(e),
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return Ok(()),
            }
        }
        match ws.flush() {
            Ok(()) => {}
            Err(e) if would_block(&e) => {}
            Err(e) => return Err(e),
        }
        if idle {
            thread::sleep(Duration::from_millis(1));
        }
    }
    let _ = ws.close(None);
    Ok(())
}
