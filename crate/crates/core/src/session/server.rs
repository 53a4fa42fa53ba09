use std::collections::{HashMap, VecDeque};
use std::io::{BufReader, ErrorKind};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::engine::{EngineConfig, SessionEngine, SessionEvent};
use super::wire::{
    decode, encode, read_frame, write_frame, ClientMessage, ClockMode, ServerMessage,
};
use crate::error::{Error, Result};
use crate::sim::{LogHeader, TrialLog};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServerOptions {
    pub clock: ClockMode,
    /// State frames sent per second in realtime mode.
    pub display_hz: f64,
    /// Outgoing frames buffered per client before the oldest state frame is dropped.
    pub queue_capacity: usize,
}

impl Default for ServerOptions {
    fn default() -> Self {
        ServerOptions {
            clock: ClockMode::Realtime,
            display_hz: 60.0,
            queue_capacity: 64,
        }
    }
}

struct Outbox {
    queue: Mutex<(VecDeque<(bool, String)>, bool)>,
    ready: Condvar,
    capacity: usize,
}

impl Outbox {
    fn push(&self, msg: &ServerMessage) {
        let is_frame = matches!(msg, ServerMessage::StateFrame { .. });
        let mut q = self.queue.lock().expect("outbox lock");
        if q.0.len() >= self.capacity {
            match q.0.iter().position(|(f, _)| *f) {
                Some(i) => {
                    q.0.remove(i);
                }
                None => {
                    q.0.pop_front();
                }
            }
        }
        q.0.push_back((is_frame, encode(msg)));
        self.ready.notify_one();
    }

    fn close(&self) {
        self.queue.lock().expect("outbox lock").1 = true;
        self.ready.notify_one();
    }

    fn writer(self: Arc<Self>, mut stream: TcpStream) {
        loop {
            let next = {
                let mut q = self.queue.lock().expect("outbox lock");
                while q.0.is_empty() && !q.1 {
                    q = self.ready.wait(q).expect("outbox lock");
                }
                q.0.pop_front()
            };
            match next {
                Some((_, payload)) => {
                    if write_frame(&mut stream, &payload).is_err() {
                        break;
                    }
                }
                None => break,
            }
        }
        let _ = stream.shutdown(Shutdown::Both);
    }
}

enum Inbound {
    Message(ClientMessage),
    Invalid(String),
    Closed,
}

fn reader(id: u64, stream: TcpStream, tx: Sender<(u64, Inbound)>) {
    let mut r = BufReader::new(stream);
    loop {
        let item = match read_frame(&mut r) {
            Ok(Some(payload)) => match decode::<ClientMessage>(&payload) {
                Ok(m) => Inbound::Message(m),
                Err(e) => Inbound::Invalid(e.to_string()),
            },
            Ok(None) | Err(_) => Inbound::Closed,
        };
        let closed = matches!(item, Inbound::Closed);
        if tx.send((id, item)).is_err() || closed {
            break;
        }
    }
}

/// TCP front end for one [`SessionEngine`]. Every client receives state frames
/// and trial ends; errors go back to the sender only. If the client that
/// started the running trial disconnects, the trial is aborted.
pub struct Server {
    listener: TcpListener,
    engine: SessionEngine,
    options: ServerOptions,
}

impl Server {
    pub fn bind(
        addr: impl ToSocketAddrs,
        mut config: EngineConfig,
        options: ServerOptions,
    ) -> Result<Self> {
        if options.display_hz.is_nan() || options.display_hz <= 0.0 || options.queue_capacity == 0 {
            return Err(Error::invalid(
                "display rate and queue capacity must be positive",
            ));
        }
        config.lockstep = options.clock == ClockMode::Lockstep;
        let engine = SessionEngine::new(config)?;
        let listener = TcpListener::bind(addr).map_err(|e| Error::Wire(format!("bind: {e}")))?;
        listener
            .set_nonblocking(true)
            .map_err(|e| Error::Wire(format!("listener: {e}")))?;
        Ok(Server {
            listener,
            engine,
            options,
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        self.listener
            .local_addr()
            .map_err(|e| Error::Wire(format!("local address: {e}")))
    }

    /// Serves until `shutdown` is set, then aborts any running trial and
    /// returns every finished trial log.
    pub fn run(mut self, shutdown: Arc<AtomicBool>) -> Result<Vec<TrialLog>> {
        let (tx, rx) = mpsc::channel::<(u64, Inbound)>();
        let mut clients: HashMap<u64, Arc<Outbox>> = HashMap::new();
        let mut next_id = 0u64;
        let mut controller: Option<u64> = None;
        let dt = Duration::from_secs_f64(self.engine.config().base.dt);
        let decimate = ((1.0 / (self.options.display_hz * self.engine.config().base.dt)).round()
            as u64)
            .max(1);
        let mut next_tick = Instant::now() + dt;
        let hello = ServerMessage::Hello {
            clock: self.options.clock,
            config: LogHeader::from_config(&self.engine.config().base),
        };

        while !shutdown.load(Ordering::SeqCst) {
            loop {
                match self.listener.accept() {
                    Ok((stream, _)) => {
                        let id = next_id;
                        next_id += 1;
                        stream.set_nonblocking(false).ok();
                        stream.set_nodelay(true).ok();
                        let (Ok(rs), Ok(ws)) = (stream.try_clone(), stream.try_clone()) else {
                            continue;
                        };
                        let outbox = Arc::new(Outbox {
                            queue: Mutex::new((VecDeque::new(), false)),
                            ready: Condvar::new(),
                            capacity: self.options.queue_capacity,
                        });
                        outbox.push(&hello);
                        let w = Arc::clone(&outbox);
                        thread::spawn(move || w.writer(ws));
                        let t = tx.clone();
                        thread::spawn(move || reader(id, rs, t));
                        clients.insert(id, outbox);
                    }
                    Err(e) if e.kind() == ErrorKind::WouldBlock => break,
                    Err(e) => return Err(Error::Wire(format!("accept: {e}"))),
                }
            }

            let wait = match self.options.clock {
                ClockMode::Realtime if self.engine.running() => {
                    next_tick.saturating_duration_since(Instant::now())
                }
                _ => Duration::from_millis(20),
            };
            match rx.recv_timeout(wait) {
                Ok(first) => {
                    let mut batch = vec![first];
                    batch.extend(rx.try_iter());
                    for (id, inbound) in batch {
                        let event = match inbound {
                            Inbound::Message(m) => {
                                if matches!(m, ClientMessage::StartTrial { .. })
                                    && !self.engine.running()
                                {
                                    controller = Some(id);
                                }
                                SessionEvent::Message { message: m }
                            }
                            Inbound::Invalid(msg) => {
                                if let Some(c) = clients.get(&id) {
                                    c.push(&ServerMessage::error("bad_message", msg));
                                }
                                continue;
                            }
                            Inbound::Closed => {
                                if let Some(c) = clients.remove(&id) {
                                    c.close();
                                }
                                if controller != Some(id) {
                                    continue;
                                }
                                controller = None;
                                SessionEvent::Disconnect
                            }
                        };
                        let was_running = self.engine.running();
                        let out = self.engine.apply(&event)?;
                        if !was_running && self.engine.running() {
                            next_tick = Instant::now() + dt;
                        }
                        dispatch(&clients, id, &out, 1);
                    }
                }
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => break,
            }

            if self.options.clock == ClockMode::Realtime
                && self.engine.running()
                && Instant::now() >= next_tick
            {
                next_tick += dt;
                let out = self.engine.tick()?;
                dispatch(&clients, u64::MAX, &out, decimate);
            }
        }

        let out = self.engine.disconnect()?;
        dispatch(&clients, u64::MAX, &out, 1);
        for c in clients.values() {
            c.close();
        }
        Ok(self.engine.completed().to_vec())
    }
}

fn dispatch(
    clients: &HashMap<u64, Arc<Outbox>>,
    sender: u64,
    out: &[ServerMessage],
    decimate: u64,
) {
    let ends = out
        .iter()
        .any(|m| matches!(m, ServerMessage::TrialEnd { .. }));
    for msg in out {
        match msg {
            ServerMessage::Error { .. } => {
                if let Some(c) = clients.get(&sender) {
                    c.push(msg);
                }
            }
            ServerMessage::StateFrame { tick, .. } if !ends && tick % decimate != 0 => {}
            _ => clients.values().for_each(|c| c.push(msg)),
        }
    }
}
