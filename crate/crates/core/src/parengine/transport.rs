//! Point-to-point message delivery between domain workers.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use super::EngineError;

/// How long a worker waits for a neighbour before declaring it lost.
pub const RECV_TIMEOUT: Duration = Duration::from_secs(120);

/// One worker's connection to its neighbours. Frames are opaque bytes.
pub trait Endpoint: Send {
    fn send(&mut self, to: usize, frame: Vec<u8>) -> Result<(), EngineError>;
    fn recv(&mut self, from: usize) -> Result<Vec<u8>, EngineError>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransportKind {
    /// In-process channels.
    Channel,
    /// Loopback TCP sockets with length-prefixed frames.
    Tcp,
}

impl std::str::FromStr for TransportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "channel" | "inproc" => Ok(TransportKind::Channel),
            "tcp" | "socket" => Ok(TransportKind::Tcp),
            other => Err(format!("unknown transport '{other}' (expected channel or tcp)")),
        }
    }
}

/// Endpoints for workers whose neighbour lists are `neighbors` (symmetric).
pub fn connect(kind: TransportKind, neighbors: &[Vec<usize>]) -> Result<Vec<Box<dyn Endpoint>>, EngineError> {
    match kind {
        TransportKind::Channel => Ok(channel_endpoints(neighbors)),
        TransportKind::Tcp => tcp_endpoints(neighbors),
    }
}

struct ChannelEndpoint {
    me: usize,
    tx: HashMap<usize, Sender<Vec<u8>>>,
    rx: HashMap<usize, Receiver<Vec<u8>>>,
}

fn lost(me: usize, peer: usize, what: &str) -> EngineError {
    EngineError::Transport(format!("domain {me}: {what} domain {peer}"))
}

impl Endpoint for ChannelEndpoint {
    fn send(&mut self, to: usize, frame: Vec<u8>) -> Result<(), EngineError> {
        let tx = self.tx.get(&to).ok_or_else(|| lost(self.me, to, "no route to"))?;
        tx.send(frame).map_err(|_| lost(self.me, to, "lost connection to"))
    }

    fn recv(&mut self, from: usize) -> Result<Vec<u8>, EngineError> {
        let rx = self.rx.get(&from).ok_or_else(|| lost(self.me, from, "no route from"))?;
        rx.recv_timeout(RECV_TIMEOUT).map_err(|e| match e {
            RecvTimeoutError::Timeout => lost(self.me, from, "timed out waiting for"),
            RecvTimeoutError::Disconnected => lost(self.me, from, "lost connection to"),
        })
    }
}

fn channel_endpoints(neighbors: &[Vec<usize>]) -> Vec<Box<dyn Endpoint>> {
    let mut eps: Vec<ChannelEndpoint> = (0..neighbors.len())
        .map(|me| ChannelEndpoint { me, tx: HashMap::new(), rx: HashMap::new() })
        .collect();
    for (a, nbs) in neighbors.iter().enumerate() {
        for &b in nbs {
            let (tx, rx) = channel();
            eps[a].tx.insert(b, tx);
            eps[b].rx.insert(a, rx);
        }
    }
    eps.into_iter().map(|e| Box::new(e) as Box<dyn Endpoint>).collect()
}

struct TcpEndpoint {
    me: usize,
    streams: HashMap<usize, TcpStream>,
    rx: HashMap<usize, Receiver<Vec<u8>>>,
}

impl Drop for TcpEndpoint {
    fn drop(&mut self) {
        for s in self.streams.values() {
            let _ = s.shutdown(Shutdown::Both);
        }
    }
}

impl Endpoint for TcpEndpoint {
    fn send(&mut self, to: usize, frame: Vec<u8>) -> Result<(), EngineError> {
        let me = self.me;
        let s = self.streams.get_mut(&to).ok_or_else(|| lost(me, to, "no route to"))?;
        let len = u32::try_from(frame.len()).map_err(|_| EngineError::Transport("frame too large".into()))?;
        s.write_all(&len.to_le_bytes())
            .and_then(|_| s.write_all(&frame))
            .map_err(|e| EngineError::Transport(format!("domain {me}: send to domain {to}: {e}")))
    }

    fn recv(&mut self, from: usize) -> Result<Vec<u8>, EngineError> {
        let rx = self.rx.get(&from).ok_or_else(|| lost(self.me, from, "no route from"))?;
        rx.recv_timeout(RECV_TIMEOUT).map_err(|e| match e {
            RecvTimeoutError::Timeout => lost(self.me, from, "timed out waiting for"),
            RecvTimeoutError::Disconnected => lost(self.me, from, "lost connection to"),
        })
    }
}

/// Frames arriving on `stream` are forwarded to `tx` by a reader thread, so
/// senders never block on a peer that is itself busy sending.
fn spawn_reader(mut stream: TcpStream, tx: Sender<Vec<u8>>) {
    std::thread::spawn(move || loop {
        let mut len = [0u8; 4];
        if stream.read_exact(&mut len).is_err() {
            return;
        }
        let mut body = vec![0u8; u32::from_le_bytes(len) as usize];
        if stream.read_exact(&mut body).is_err() || tx.send(body).is_err() {
            return;
        }
    });
}

fn tcp_endpoints(neighbors: &[Vec<usize>]) -> Result<Vec<Box<dyn Endpoint>>, EngineError> {
    let io = |e: std::io::Error| EngineError::Transport(format!("socket setup: {e}"));
    let listeners: Vec<TcpListener> =
        (0..neighbors.len()).map(|_| TcpListener::bind("127.0.0.1:0")).collect::<Result<_, _>>().map_err(io)?;
    let mut eps: Vec<TcpEndpoint> =
        (0..neighbors.len()).map(|me| TcpEndpoint { me, streams: HashMap::new(), rx: HashMap::new() }).collect();
    for (a, nbs) in neighbors.iter().enumerate() {
        for &b in nbs.iter().filter(|&&b| b > a) {
            let addr = listeners[a].local_addr().map_err(io)?;
            let from_b = TcpStream::connect(addr).map_err(io)?;
            let (at_a, _) = listeners[a].accept().map_err(io)?;
            for (me, peer, s) in [(a, b, at_a), (b, a, from_b)] {
                s.set_nodelay(true).map_err(io)?;
                let (tx, rx) = channel();
                spawn_reader(s.try_clone().map_err(io)?, tx);
                eps[me].rx.insert(peer, rx);
                eps[me].streams.insert(peer, s);
            }
        }
    }
    Ok(eps.into_iter().map(|e| Box::new(e) as Box<dyn Endpoint>).collect())
}
