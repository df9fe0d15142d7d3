//! Live session over WebSocket.
//!
//! A client opens a WebSocket and sends a text handshake,
//! `{"protocol":"touchlink","version":1}`. The server answers with a text
//! [`HandshakeReply`]; on a mismatch it sets `accepted` to false and closes.
//! Afterwards every message is a binary frame in the session encoding:
//! clients send `steering` (the header site selects whose hand moves), the
//! server streams `snapshot` frames and answers bad input with `error`.
//!
//! The simulation runs on its own thread and outlives client connections.

use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver as MpscReceiver, Sender as MpscSender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tungstenite::{Message, WebSocket};

use super::engine::Session;
use super::message::{Payload, SiteFrameMessage, SiteId, StateSnapshot, SteeringInput};
use super::scenario::Scenario;
use crate::error::{Error, Result};

pub const PROTOCOL_NAME: &str = "touchlink";
pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_SNAPSHOT_HZ: f64 = 10.0;
const POLL: Duration = Duration::from_millis(5);
const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(5);
/// Longest stretch of simulated time run between snapshot checks.
const MAX_CATCH_UP_MS: i64 = 50;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Handshake {
    pub protocol: String,
    pub version: u32,
}

impl Handshake {
    pub fn current() -> Self {
        Self {
            protocol: PROTOCOL_NAME.into(),
            version: PROTOCOL_VERSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandshakeReply {
    pub protocol: String,
    pub version: u32,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub width: u32,
    pub height: u32,
    pub snapshot_hz: f64,
}

/// Serve configuration: a scenario file (hands start on their tracks until
/// steered; `duration_ms` may be omitted) plus an optional `[serve]` table.
///
/// ```toml
/// [serve]
/// snapshot_hz = 10.0
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ServeConfig {
    pub scenario: Scenario,
    pub snapshot_hz: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServeSection {
    #[serde(default = "default_snapshot_hz")]
    snapshot_hz: f64,
}

fn default_snapshot_hz() -> f64 {
    DEFAULT_SNAPSHOT_HZ
}

impl ServeConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            snapshot_hz: DEFAULT_SNAPSHOT_HZ,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
            line: e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0),
            message: e.message().to_string(),
        })?;
        let section: ServeSection = match table.remove("serve") {
            Some(v) => v.try_into().map_err(|e: toml::de::Error| Error::field("serve", e.message()))?,
            None => ServeSection {
                snapshot_hz: DEFAULT_SNAPSHOT_HZ,
            },
        };
        table
            .entry("duration_ms")
            .or_insert(toml::Value::Integer(i64::from(i32::MAX)));
        let scenario = Scenario::from_toml(&toml::to_string(&table).expect("table serializes"))?;
        let c = Self {
            scenario,
            snapshot_hz: section.snapshot_hz,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.snapshot_hz > 0.0 && self.snapshot_hz <= 100.0) {
            return Err(Error::field("serve.snapshot_hz", "must be in (0, 100]"));
        }
        self.scenario.validate()
    }
}

type Subscribers = Arc<Mutex<Vec<MpscSender<Arc<Vec<u8>>>>>>;

/// Running endpoint; dropping it stops the server.
pub struct ServeHandle {
    pub addr: SocketAddr,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
    sim_error: Arc<Mutex<Option<String>>>,
}

impl ServeHandle {
    /// Error that stopped the simulation thread, if any.
    pub fn failure(&self) -> Option<String> {
        self.sim_error.lock().expect("poisoned").clone()
    }

    /// Blocks until the server stops.
    pub fn wait(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop_threads();
    }

    fn stop_threads(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for ServeHandle {
    fn drop(&mut self) {
        self.stop_threads();
    }
}

/// Starts a live session on `port` (0 picks a free port) bound to localhost.
pub fn serve(config: ServeConfig, port: u16) -> Result<ServeHandle> {
    serve_on(config, SocketAddr::from(([127, 0, 0, 1], port)))
}

pub fn serve_on(config: ServeConfig, addr: SocketAddr) -> Result<ServeHandle> {
    config.validate()?;
    let session = Session::new(&config.scenario)?.without_trace();
    let listener = TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let subscribers: Subscribers = Arc::new(Mutex::new(Vec::new()));
    let (steer_tx, steer_rx) = mpsc::channel();
    let sim_error = Arc::new(Mutex::new(None));

    let sim = {
        let stop = stop.clone();
        let subscribers = subscribers.clone();
        let sim_error = sim_error.clone();
        let period = Duration::from_secs_f64(1.0 / config.snapshot_hz);
        thread::spawn(move || {
            if let Err(e) = run_simulation(session, steer_rx, subscribers, period, &stop) {
                *sim_error.lock().expect("poisoned") = Some(e.to_string());
            }
        })
    };

    let acceptor = {
        let stop = stop.clone();
        let reply = HandshakeReply {
            protocol: PROTOCOL_NAME.into(),
            version: PROTOCOL_VERSION,
            accepted: true,
            error: None,
            width: config.scenario.render.width,
            height: config.scenario.render.height,
            snapshot_hz: config.snapshot_hz,
        };
        let scenario = Arc::new(config.scenario.clone());
        thread::spawn(move || {
            let mut conns = Vec::new();
            while !stop.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        let ctx = Connection {
                            stop: stop.clone(),
                            subscribers: subscribers.clone(),
                            steering: steer_tx.clone(),
                            reply: reply.clone(),
                            scenario: scenario.clone(),
                        };
                        conns.push(thread::spawn(move || {
                            let _ = ctx.run(stream);
                        }));
                    }
                    Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
                    Err(_) => thread::sleep(POLL),
                }
                conns.retain(|c: &JoinHandle<()>| !c.is_finished());
            }
            for c in conns {
                let _ = c.join();
            }
        })
    };

    Ok(ServeHandle {
        addr,
        stop,
        threads: vec![sim, acceptor],
        sim_error,
    })
}

fn run_simulation(
    mut session: Session,
    steering: MpscReceiver<(SiteId, SteeringInput)>,
    subscribers: Subscribers,
    period: Duration,
    stop: &AtomicBool,
) -> Result<()> {
    let start = Instant::now();
    let mut next_snapshot = start;
    let mut seq = 0u64;
    while !stop.load(Ordering::SeqCst) {
        while let Ok((site, input)) = steering.try_recv() {
            // Validated by the connection; a failure here only means the pose is ignored.
            let _ = session.steer(site, input);
        }
        let target = start.elapsed().as_millis() as i64;
        let end = target.min(session.now() + MAX_CATCH_UP_MS);
        session.run_until(end)?;
        if Instant::now() >= next_snapshot {
            let snap = session.snapshot()?;
            broadcast(&subscribers, snapshot_frame(snap, seq));
            seq += 1;
            next_snapshot += period;
            if next_snapshot < Instant::now() {
                next_snapshot = Instant::now() + period;
            }
        }
        if session.now() > start.elapsed().as_millis() as i64 {
            thread::sleep(Duration::from_millis(1));
        }
    }
    Ok(())
}

fn snapshot_frame(snap: StateSnapshot, seq: u64) -> Arc<Vec<u8>> {
    let t = snap.t_ms;
    Arc::new(SiteFrameMessage::new(SiteId::A, t, seq, Payload::Snapshot(Box::new(snap))).encode())
}

fn broadcast(subscribers: &Subscribers, frame: Arc<Vec<u8>>) {
    subscribers
        .lock()
        .expect("poisoned")
        .retain(|s| s.send(frame.clone()).is_ok());
}

struct Connection {
    stop: Arc<AtomicBool>,
    subscribers: Subscribers,
    steering: MpscSender<(SiteId, SteeringInput)>,
    reply: HandshakeReply,
    scenario: Arc<Scenario>,
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut))
}

fn ws_err(e: tungstenite::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

impl Connection {
    fn run(self, stream: TcpStream) -> Result<()> {
        stream.set_nonblocking(false)?;
        stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT))?;
        let mut ws = tungstenite::accept(stream).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        if !self.handshake(&mut ws)? {
            let _ = ws.close(None);
            let _ = ws.flush();
            return Ok(());
        }
        ws.get_mut().set_read_timeout(Some(POLL))?;
        let (tx, rx) = mpsc::channel();
        self.subscribers.lock().expect("poisoned").push(tx);
        let mut error_seq = 0u64;
        while !self.stop.load(Ordering::SeqCst) {
            match ws.read() {
                Ok(Message::Binary(b)) => {
                    if let Some(reply) = self.handle(&b, error_seq) {
                        error_seq += 1;
                        ws.send(Message::binary(reply)).map_err(ws_err)?;
                    }
                }
                Ok(Message::Text(_)) => {
                    let m = SiteFrameMessage::new(SiteId::A, 0, error_seq, Payload::Error("expected a binary frame".into()));
                    error_seq += 1;
                    ws.send(Message::binary(m.encode())).map_err(ws_err)?;
                }
                Ok(Message::Close(_)) => break,
                Ok(_) => {}
                Err(e) if is_timeout(&e) => {}
                Err(_) => break,
            }
            while let Ok(frame) = rx.try_recv() {
                ws.send(Message::binary(frame.as_slice().to_vec())).map_err(ws_err)?;
            }
        }
        let _ = ws.close(None);
        let _ = ws.flush();
        Ok(())
    }

    fn handshake(&self, ws: &mut WebSocket<TcpStream>) -> Result<bool> {
        let mut reply = self.reply.clone();
        let msg = ws.read().map_err(ws_err)?;
        let hello = match &msg {
            Message::Text(t) => serde_json::from_str::<Handshake>(t.as_str()).map_err(|e| e.to_string()),
            _ => Err("expected a text handshake".to_string()),
        };
        match hello {
            Ok(h) if h.protocol == PROTOCOL_NAME && h.version == PROTOCOL_VERSION => {}
            Ok(h) => {
                reply.accepted = false;
                reply.error = Some(format!(
                    "unsupported protocol {} version {}, server speaks {PROTOCOL_NAME} version {PROTOCOL_VERSION}",
                    h.protocol, h.version
                ));
            }
            Err(e) => {
                reply.accepted = false;
                reply.error = Some(e);
            }
        }
        let text = serde_json::to_string(&reply).expect("reply serializes");
        ws.send(Message::text(text)).map_err(ws_err)?;
        Ok(reply.accepted)
    }

    /// Applies one client frame; returns an encoded error reply when it is rejected.
    fn handle(&self, bytes: &[u8], seq: u64) -> Option<Vec<u8>> {
        let err = |site, ts, text: String| Some(SiteFrameMessage::new(site, ts, seq, Payload::Error(text)).encode());
        let m = match SiteFrameMessage::decode(bytes) {
            Ok(m) => m,
            Err(e) => return err(SiteId::A, 0, format!("malformed message: {e}")),
        };
        let Payload::Steering(input) = m.payload else {
            return err(m.site, m.timestamp_ms, format!("unexpected {:?} message", m.kind()));
        };
        let screen = match self.scenario.sites.get(m.site).screen() {
            Ok(s) => s,
            Err(e) => return err(m.site, m.timestamp_ms, e.to_string()),
        };
        if let Err(e) = validate_steering(&screen, &input) {
            return err(m.site, m.timestamp_ms, e.to_string());
        }
        let _ = self.steering.send((m.site, input));
        None
    }
}

/// Steering must place the palm over the screen, 0 to 2 m in front of it.
pub fn validate_steering(screen: &crate::spatial_calib::ScreenGeometry, input: &SteeringInput) -> Result<()> {
    let ok = [input.x, input.y, input.distance].iter().all(|v| v.is_finite())
        && input.x.abs() <= screen.width / 2.0
        && input.y.abs() <= screen.height / 2.0
        && (0.0..=2.0).contains(&input.distance);
    if ok {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "steering ({}, {}, {}) is outside the screen or 0..2 m",
            input.x, input.y, input.distance
        )))
    }
}

/// Minimal blocking client for the serve protocol.
pub struct ServeClient {
    ws: WebSocket<TcpStream>,
    pub reply: HandshakeReply,
    seq: u64,
}

impl ServeClient {
    pub fn connect(addr: SocketAddr) -> Result<Self> {
        Self::connect_with(addr, &Handshake::current())
    }

    /// Connects with an arbitrary handshake; a rejected handshake is an error carrying the server's reason.
    pub fn connect_with(addr: SocketAddr, hello: &Handshake) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT))?;
        let (mut ws, _) = tungstenite::client(format!("ws://{addr}/"), stream)
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        ws.send(Message::text(serde_json::to_string(hello).expect("handshake serializes")))
            .map_err(ws_err)?;
        let reply = loop {
            match ws.read().map_err(ws_err)? {
                Message::Text(t) => {
                    break serde_json::from_str::<HandshakeReply>(t.as_str()).map_err(|e| Error::Codec(e.to_string()))?
                }
                Message::Binary(_) => return Err(Error::Codec("expected a handshake reply".into())),
                _ => {}
            }
        };
        if !reply.accepted {
            return Err(Error::Configuration(reply.error.unwrap_or_else(|| "handshake rejected".into())));
        }
        Ok(Self { ws, reply, seq: 0 })
    }

    pub fn send_steering(&mut self, site: SiteId, input: SteeringInput) -> Result<()> {
        let m = SiteFrameMessage::new(site, 0, self.seq, Payload::Steering(input));
        self.seq += 1;
        self.send_raw(m.encode())
    }

    pub fn send_raw(&mut self, bytes: Vec<u8>) -> Result<()> {
        self.ws.send(Message::binary(bytes)).map_err(ws_err)
    }

    /// Next binary frame from the server, or `None` after `timeout`.
    pub fn next_message(&mut self, timeout: Duration) -> Result<Option<SiteFrameMessage>> {
        let deadline = Instant::now() + timeout;
        self.ws.get_mut().set_read_timeout(Some(POLL))?;
        while Instant::now() < deadline {
            match self.ws.read() {
                Ok(Message::Binary(b)) => return SiteFrameMessage::decode(&b).map(Some),
                Ok(Message::Close(_)) => return Err(Error::Io(ErrorKind::ConnectionAborted.into())),
                Ok(_) => {}
                Err(e) if is_timeout(&e) => {}
                Err(e) => return Err(ws_err(e)),
            }
        }
        Ok(None)
    }

    /// Next snapshot satisfying `pred`, skipping others, within `timeout`.
    pub fn wait_snapshot(
        &mut self,
        timeout: Duration,
        mut pred: impl FnMut(&StateSnapshot) -> bool,
    ) -> Result<Option<StateSnapshot>> {
        let deadline = Instant::now() + timeout;
        while let Some(left) = deadline.checked_duration_since(Instant::now()) {
            if let Some(m) = self.next_message(left)? {
                if let Payload::Snapshot(s) = m.payload {
                    if pred(&s) {
                        return Ok(Some(*s));
                    }
                }
            }
        }
        Ok(None)
    }

    pub fn close(mut self) {
        let _ = self.ws.close(None);
        let _ = self.ws.flush();
    }
}
