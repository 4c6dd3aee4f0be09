//! One role per process over TCP.
//!
//! Every connection has a reader thread that stamps each frame with the
//! role's clock as soon as `read` returns and hands it to the role's event
//! loop. Writes happen on the event loop thread; the send timestamp is taken
//! when the write call returns.

use std::collections::HashMap;
use std::io::{BufReader, ErrorKind};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use super::agents::{Agent, Outbox, RoleAgent};
use super::session::SessionReport;
use super::wire::Frame;
use super::{ProtocolConfig, Role, TransportError};
use crate::coding::{SdInstance, SdWitness};

/// Wall-clock epoch nanoseconds read through a monotonic clock, minus the
/// role's configured offset.
#[derive(Clone, Copy, Debug)]
pub struct RoleClock {
    base_epoch_ns: i64,
    base: Instant,
    offset_ns: i64,
}

impl RoleClock {
    pub fn new(offset_ns: i64) -> Self {
        let epoch = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos() as i64)
            .unwrap_or(0);
        Self {
            base_epoch_ns: epoch,
            base: Instant::now(),
            offset_ns,
        }
    }

    pub fn now(&self) -> i64 {
        self.base_epoch_ns + self.base.elapsed().as_nanos() as i64 - self.offset_ns
    }
}

#[derive(Clone, Debug)]
pub struct NetOptions {
    pub connect_timeout: Duration,
    /// Extra time allowed beyond the scheduled session length.
    pub session_slack: Duration,
    /// Delay between `V1` choosing `T1` and the first round.
    pub start_delay: Duration,
}

impl Default for NetOptions {
    fn default() -> Self {
        Self {
            connect_timeout: Duration::from_secs(10),
            session_slack: Duration::from_secs(30),
            start_delay: Duration::from_millis(200),
        }
    }
}

#[derive(Debug)]
pub enum RoleOutcome {
    Verifier(Box<SessionReport>),
    Prover { answered: usize },
}

enum Incoming {
    Frame { from: Role, frame: Frame, at: i64 },
    Closed { from: Role },
}

fn spawn_reader(stream: TcpStream, from: Role, clock: RoleClock, tx: Sender<Incoming>) {
    thread::spawn(move || {
        let mut r = BufReader::new(stream);
        loop {
            match Frame::read_from(&mut r) {
                Ok(Some(frame)) => {
                    let at = clock.now();
                    if tx.send(Incoming::Frame { from, frame, at }).is_err() {
                        return;
                    }
                }
                Ok(None) | Err(_) => {
                    let _ = tx.send(Incoming::Closed { from });
                    return;
                }
            }
        }
    });
}

fn connect_with_retry(addr: &str, deadline: Instant) -> Result<TcpStream, TransportError> {
    let target = addr
        .to_socket_addrs()
        .map_err(|e| TransportError::Connect(format!("{addr}: {e}")))?
        .next()
        .ok_or_else(|| TransportError::Connect(format!("{addr}: no address")))?;
    loop {
        let remaining = deadline.saturating_duration_since(Instant::now());
        match TcpStream::connect_timeout(&target, remaining.max(Duration::from_millis(10))) {
            Ok(s) => {
                s.set_nodelay(true)?;
                return Ok(s);
            }
            Err(e) if Instant::now() >= deadline => {
                return Err(TransportError::Connect(format!("{addr}: {e}")));
            }
            Err(_) => thread::sleep(Duration::from_millis(25)),
        }
    }
}

fn accept_before(listener: &TcpListener, deadline: Instant, what: &str) -> Result<TcpStream, TransportError> {
    listener.set_nonblocking(true)?;
    loop {
        match listener.accept() {
            Ok((s, _)) => {
                s.set_nonblocking(false)?;
                s.set_nodelay(true)?;
                return Ok(s);
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    return Err(TransportError::Connect(format!("no connection from {what}")));
                }
                thread::sleep(Duration::from_millis(5));
            }
            Err(e) => return Err(e.into()),
        }
    }
}

fn bind(addr: &str) -> Result<TcpListener, TransportError> {
    TcpListener::bind(addr).map_err(|e| TransportError::Connect(format!("bind {addr}: {e}")))
}

/// Opens the connections `role` takes part in.
fn establish(role: Role, config: &ProtocolConfig, opts: &NetOptions) -> Result<Vec<(Role, TcpStream)>, TransportError> {
    let deadline = Instant::now() + opts.connect_timeout;
    let ep = &config.endpoints;
    let relays = config.adversary.relays();
    let mut conns = Vec::new();
    match role {
        Role::P1 => {
            let l = bind(&ep.p1)?;
            if relays {
                conns.push((Role::P2, connect_with_retry(&ep.relay, deadline)?));
            }
            conns.push((Role::V1, accept_before(&l, deadline, "v1")?));
        }
        Role::P2 => {
            let l = bind(&ep.p2)?;
            if relays {
                let relay = bind(&ep.relay)?;
                conns.push((Role::P1, accept_before(&relay, deadline, "p1")?));
            }
            conns.push((Role::V2, accept_before(&l, deadline, "v2")?));
        }
        Role::V2 => {
            let l = bind(&ep.v2)?;
            conns.push((Role::P2, connect_with_retry(&ep.p2, deadline)?));
            conns.push((Role::V1, accept_before(&l, deadline, "v1")?));
        }
        Role::V1 => {
            conns.push((Role::P1, connect_with_retry(&ep.p1, deadline)?));
            conns.push((Role::V2, connect_with_retry(&ep.v2, deadline)?));
        }
    }
    Ok(conns)
}

/// Runs one role to completion over TCP.
pub fn run_role(
    role: Role,
    config: &ProtocolConfig,
    instance: Arc<SdInstance>,
    witness: Option<SdWitness>,
    opts: &NetOptions,
) -> Result<RoleOutcome, TransportError> {
    config.validate()?;
    let mut agent = match RoleAgent::new(role, config, instance, witness)? {
        RoleAgent::Verifier(v) => RoleAgent::Verifier(v.with_start_delay(opts.start_delay.as_nanos() as i64)),
        p => p,
    };
    let clock = RoleClock::new(*config.clock_offset_ns.get(role));
    let conns = establish(role, config, opts)?;

    let (tx, rx): (Sender<Incoming>, Receiver<Incoming>) = mpsc::channel();
    let mut writers: HashMap<Role, TcpStream> = HashMap::new();
    for (peer, stream) in conns {
        spawn_reader(stream.try_clone()?, peer, clock, tx.clone());
        writers.insert(peer, stream);
    }
    drop(tx);

    let session_len = Duration::from_nanos(
        (config.delta_t_ns.max(0) as u64)
            .saturating_mul(config.rounds as u64 + 2)
            .saturating_add(config.report_grace_ns.max(0) as u64),
    );
    let give_up = Instant::now() + opts.start_delay + session_len + opts.session_slack;
    let mut out = Outbox::new();

    let flush = |agent: &mut RoleAgent, out: &mut Outbox, writers: &mut HashMap<Role, TcpStream>| {
        for (to, frame) in out.drain(..) {
            let Some(w) = writers.get_mut(&to) else { continue };
            // stamped before the write: the answer can be read and stamped
            // by the reader thread before the write call returns
            let at = clock.now();
            if frame.write_to(w).is_ok() {
                agent.on_sent(to, &frame, at);
            } else {
                writers.remove(&to);
            }
        }
    };

    while !agent.is_done() {
        let now = clock.now();
        if Instant::now() >= give_up {
            return Err(TransportError::Timeout(format!("{role} did not finish in time")));
        }
        let wait_ns = match agent.next_wakeup() {
            Some(t) if t <= now => {
                agent.on_wakeup(now, &mut out);
                flush(&mut agent, &mut out, &mut writers);
                continue;
            }
            Some(t) => (t - now) as u64,
            None => 100_000_000,
        };
        // sleep coarse, then spin for the last stretch before a timer
        const SPIN_NS: u64 = 1_000_000;
        let incoming = if wait_ns > SPIN_NS {
            match rx.recv_timeout(Duration::from_nanos(wait_ns - SPIN_NS)) {
                Ok(m) => Some(m),
                Err(RecvTimeoutError::Timeout) => None,
                Err(RecvTimeoutError::Disconnected) => {
                    return finish_disconnected(role, agent);
                }
            }
        } else {
            rx.try_recv().ok()
        };
        match incoming {
            Some(Incoming::Frame { from, frame, at }) => {
                agent.on_frame(at, from, frame, &mut out);
                flush(&mut agent, &mut out, &mut writers);
            }
            Some(Incoming::Closed { from }) => {
                writers.remove(&from);
                if !role.is_verifier() && from == role.counterpart() {
                    break;
                }
            }
            None => {}
        }
    }
    outcome(agent)
}

fn finish_disconnected(role: Role, agent: RoleAgent) -> Result<RoleOutcome, TransportError> {
    if role.is_verifier() && !agent.is_done() {
        return Err(TransportError::Connect(format!("{role} lost every connection")));
    }
    outcome(agent)
}

fn outcome(agent: RoleAgent) -> Result<RoleOutcome, TransportError> {
    match agent {
        RoleAgent::Verifier(v) => match v.into_report() {
            Some(Ok(r)) => Ok(RoleOutcome::Verifier(Box::new(r))),
            Some(Err(e)) => Err(TransportError::Protocol(e)),
            None => Err(TransportError::Timeout("verifier finished without a report".into())),
        },
        RoleAgent::Prover(p) => Ok(RoleOutcome::Prover { answered: p.answered() }),
    }
}
