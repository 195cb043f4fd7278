//! TCP front end: websocket sessions and static files on one port.
//!
//! Each websocket connection gets two threads. The connection thread owns
//! the socket, parses client messages and forwards commands in order over a
//! channel; the session thread owns the [`Session`], applies commands
//! between steps, ticks the solver with the elapsed wall time and sends the
//! resulting messages back over a second channel.

use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender, TryRecvError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use tungstenite::{Message, WebSocket};

use crate::error::Result;
use crate::http::{parse_head, respond};
use crate::protocol::{parse_client, ClientMessage, ServerMessage, SessionCommand, SessionState, PROTOCOL_VERSION};
use crate::session::{Session, SessionOptions};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub bind: String,
    pub max_sessions: usize,
    /// Directory served over plain HTTP; a small built-in page otherwise.
    pub static_dir: Option<PathBuf>,
    pub session: SessionOptions,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: "127.0.0.1:8765".into(),
            max_sessions: 8,
            static_dir: None,
            session: SessionOptions::default(),
        }
    }
}

/// Largest wall-time budget handed to a single tick, so that a slow tick
/// does not snowball into an ever larger one.
const MAX_TICK_BUDGET: Duration = Duration::from_millis(100);
const IDLE_POLL: Duration = Duration::from_millis(5);
const HEAD_LIMIT: usize = 16 * 1024;

struct Shared {
    config: ServerConfig,
    active: AtomicUsize,
    next_id: AtomicU64,
    stop: AtomicBool,
}

pub struct Server {
    listener: TcpListener,
    shared: Arc<Shared>,
}

/// A server running on a background thread.
pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn active_sessions(&self) -> usize {
        self.shared.active.load(Ordering::SeqCst)
    }

    /// Stops accepting, asks open sessions to close and waits for the
    /// accept loop to finish.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.thread.is_some() {
            self.stop();
        }
    }
}

impl Server {
    pub fn bind(config: ServerConfig) -> Result<Self> {
        let addr = config
            .bind
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, format!("cannot resolve {}", config.bind)))?;
        let listener = TcpListener::bind(addr)?;
        let shared = Arc::new(Shared {
            config,
            active: AtomicUsize::new(0),
            next_id: AtomicU64::new(1),
            stop: AtomicBool::new(false),
        });
        Ok(Server { listener, shared })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Accepts connections until shut down, one thread per connection.
    pub fn run(self) {
        for stream in self.listener.incoming() {
            if self.shared.stop.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = stream else { continue };
            let shared = Arc::clone(&self.shared);
            thread::spawn(move || {
                if let Err(e) = handle_connection(stream, &shared) {
                    log::debug!("connection ended with error: {e}");
                }
            });
        }
    }

    pub fn spawn(self) -> Result<ServerHandle> {
        let addr = self.local_addr()?;
        let shared = Arc::clone(&self.shared);
        let thread = thread::spawn(move || self.run());
        Ok(ServerHandle { addr, shared, thread: Some(thread) })
    }
}

/// A stream that replays already-read bytes before reading the socket.
struct Replay {
    head: io::Cursor<Vec<u8>>,
    inner: TcpStream,
}

impl Read for Replay {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        if (self.head.position() as usize) < self.head.get_ref().len() {
            return self.head.read(buf);
        }
        self.inner.read(buf)
    }
}

impl Write for Replay {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.inner.write(buf)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

fn handle_connection(mut stream: TcpStream, shared: &Shared) -> Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(10)))?;
    let mut buf = Vec::new();
    let mut chunk = [0u8; 2048];
    let head = loop {
        let n = stream.read(&mut chunk)?;
        if n == 0 {
            return Ok(());
        }
        buf.extend_from_slice(&chunk[..n]);
        match parse_head(&buf) {
            Ok(Some(head)) => break head,
            Ok(None) if buf.len() < HEAD_LIMIT => continue,
            _ => {
                let _ = stream.write_all(b"HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\nConnection: close\r\n\r\n");
                return Ok(());
            }
        }
    };
    if !head.websocket {
        let resp = respond(&head, shared.config.static_dir.as_deref());
        resp.write_to(&mut stream, head.method != "HEAD")?;
        return Ok(());
    }

    let replay = Replay { head: io::Cursor::new(buf), inner: stream };
    let mut ws = tungstenite::accept(replay).map_err(|e| io::Error::other(e.to_string()))?;
    ws.get_mut().inner.set_read_timeout(Some(IDLE_POLL))?;

    let taken = shared.active.fetch_add(1, Ordering::SeqCst);
    let _guard = ActiveGuard(&shared.active);
    if taken >= shared.config.max_sessions {
        send(&mut ws, &ServerMessage::error(format!("session limit of {} reached", shared.config.max_sessions)))?;
        let _ = ws.close(None);
        let _ = ws.flush();
        return Ok(());
    }
    let id = shared.next_id.fetch_add(1, Ordering::SeqCst);
    send(&mut ws, &ServerMessage::Hello { proto: PROTOCOL_VERSION, session: id })?;

    let (cmd_tx, cmd_rx) = mpsc::channel::<SessionCommand>();
    let (out_tx, out_rx) = mpsc::channel::<ServerMessage>();
    let opts = shared.config.session;
    let worker = thread::spawn(move || session_loop(Session::new(opts), cmd_rx, out_tx));
    let result = pump_socket(&mut ws, shared, &cmd_tx, &out_rx);
    drop(cmd_tx);
    let _ = worker.join();
    let _ = ws.close(None);
    let _ = ws.flush();
    result
}

struct ActiveGuard<'a>(&'a AtomicUsize);

impl Drop for ActiveGuard<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

fn send(ws: &mut WebSocket<Replay>, msg: &ServerMessage) -> Result<()> {
    ws.send(Message::text(msg.to_json()))?;
    Ok(())
}

/// Moves messages between the socket and the session thread until either
/// side closes.
fn pump_socket(
    ws: &mut WebSocket<Replay>,
    shared: &Shared,
    cmd_tx: &Sender<SessionCommand>,
    out_rx: &Receiver<ServerMessage>,
) -> Result<()> {
    loop {
        if shared.stop.load(Ordering::SeqCst) {
            return Ok(());
        }
        loop {
            match out_rx.try_recv() {
                Ok(msg) => send(ws, &msg)?,
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return Ok(()),
            }
        }
        match ws.read() {
            Ok(Message::Text(text)) => match parse_client(text.as_str()) {
                Ok(ClientMessage::Hello { proto }) if proto == PROTOCOL_VERSION => {}
                Ok(ClientMessage::Hello { proto }) => {
                    send(ws, &ServerMessage::error(format!("unsupported protocol version {proto}; this server speaks {PROTOCOL_VERSION}")))?;
                    return Ok(());
                }
                Ok(ClientMessage::Command(cmd)) => {
                    if cmd_tx.send(cmd).is_err() {
                        return Ok(());
                    }
                }
                Err(e) => send(ws, &ServerMessage::error(e.to_string()))?,
            },
            Ok(Message::Binary(_)) => send(ws, &ServerMessage::error("binary messages are not part of the protocol"))?,
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(e.into()),
        }
    }
}

/// Owns the session: applies queued commands in arrival order, then ticks
/// with the wall time elapsed since the previous tick.
fn session_loop(mut session: Session, commands: Receiver<SessionCommand>, out: Sender<ServerMessage>) {
    let mut last = Instant::now();
    loop {
        loop {
            match commands.try_recv() {
                Ok(cmd) => {
                    if !forward(&mut session, cmd, &out) {
                        return;
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return,
            }
        }
        let now = Instant::now();
        let budget = now.duration_since(last).min(MAX_TICK_BUDGET);
        last = now;
        let report = session.tick(budget.as_secs_f64(), Some(now + MAX_TICK_BUDGET));
        for frame in report.frames {
            if out.send(ServerMessage::Frame(frame)).is_err() {
                return;
            }
        }
        if let Some(status) = report.status {
            if out.send(status).is_err() {
                return;
            }
        }
        // sleep until the next command or poll interval
        match commands.recv_timeout(IDLE_POLL) {
            Ok(cmd) => {
                if !forward(&mut session, cmd, &out) {
                    return;
                }
            }
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => return,
        }
    }
}

/// Applies `cmd` and sends the replies; false once the session is over.
fn forward(session: &mut Session, cmd: SessionCommand, out: &Sender<ServerMessage>) -> bool {
    for msg in session.apply(cmd) {
        if out.send(msg).is_err() {
            return false;
        }
    }
    session.state() != SessionState::Closed
}
