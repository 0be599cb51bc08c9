//! TCP delivery of mutants: one connection per stimulus, bounded parallelism.

use std::io::{self, ErrorKind, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::codec::response::{content_length, header_block_len, text_message_len};
use crate::codec::tplink;
use crate::mutation::MutantRequest;
use crate::protocol::Protocol;

pub const DEFAULT_CONNECT_TIMEOUT_MS: u64 = 1000;
pub const DEFAULT_READ_TIMEOUT_MS: u64 = 2000;
pub const DEFAULT_PACING_MS: u64 = 10;
pub const DEFAULT_MAX_PARALLEL: usize = 4;

/// Responses larger than this are truncated.
const MAX_RESPONSE: usize = 4 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetSpec {
    pub host: String,
    pub port: u16,
    pub protocol: Protocol,
    pub connect_timeout: Duration,
    pub read_timeout: Duration,
    /// Minimum gap between connection starts.
    pub pacing: Duration,
    pub max_parallel: usize,
}

impl TargetSpec {
    pub fn new(host: impl Into<String>, port: u16, protocol: Protocol) -> Self {
        Self {
            host: host.into(),
            port,
            protocol,
            connect_timeout: Duration::from_millis(DEFAULT_CONNECT_TIMEOUT_MS),
            read_timeout: Duration::from_millis(DEFAULT_READ_TIMEOUT_MS),
            pacing: Duration::from_millis(DEFAULT_PACING_MS),
            max_parallel: DEFAULT_MAX_PARALLEL,
        }
    }

    pub fn validate(&self) -> Result<(), InjectError> {
        if self.connect_timeout.is_zero() || self.read_timeout.is_zero() {
            return Err(InjectError::InvalidTarget("timeouts must be positive".into()));
        }
        if self.max_parallel == 0 {
            return Err(InjectError::InvalidTarget("max_parallel must be at least 1".into()));
        }
        Ok(())
    }

    fn resolve(&self) -> Result<SocketAddr, InjectError> {
        let resolve_err = |reason: String| InjectError::Resolve {
            host: self.host.clone(),
            reason,
        };
        (self.host.as_str(), self.port)
            .to_socket_addrs()
            .map_err(|e| resolve_err(e.to_string()))?
            .find(SocketAddr::is_ipv4)
            .ok_or_else(|| resolve_err("no IPv4 address".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Responded,
    Timeout,
    ConnectionRefused,
    /// Closed or reset before any response byte arrived.
    Reset,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Responded => "responded",
            Outcome::Timeout => "timeout",
            Outcome::ConnectionRefused => "connection_refused",
            Outcome::Reset => "reset",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExchangeRecord {
    pub mutant_id: usize,
    pub sent_bytes: Vec<u8>,
    pub response_bytes: Vec<u8>,
    pub outcome: Outcome,
    /// Send completion to first response byte.
    pub rtt: Option<Duration>,
    pub structure_risk: bool,
    pub started: Instant,
    pub finished: Instant,
}

impl ExchangeRecord {
    pub fn rtt_ms(&self) -> Option<f64> {
        self.rtt.map(|d| d.as_secs_f64() * 1000.0)
    }
}

/// Failures on our side of the wire; these abort a campaign.
#[derive(Debug, Error)]
pub enum InjectError {
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("cannot resolve {host}: {reason}")]
    Resolve { host: String, reason: String },
    #[error("local socket error: {0}")]
    Local(#[source] io::Error),
}

fn is_local(kind: ErrorKind) -> bool {
    matches!(
        kind,
        ErrorKind::AddrNotAvailable
            | ErrorKind::AddrInUse
            | ErrorKind::NetworkUnreachable
            | ErrorKind::HostUnreachable
            | ErrorKind::NetworkDown
            | ErrorKind::PermissionDenied
    )
}

fn is_timeout(kind: ErrorKind) -> bool {
    matches!(kind, ErrorKind::TimedOut | ErrorKind::WouldBlock)
}

/// Length of a complete response at the start of `buf`, per protocol framing.
/// HTTP without Content-Length has no boundary short of connection close.
fn response_boundary(protocol: Protocol, buf: &[u8]) -> Option<usize> {
    match protocol {
        Protocol::TplinkSmarthome => tplink::complete_frame_len(buf),
        Protocol::Rtsp => text_message_len(buf),
        Protocol::Http => {
            let head = header_block_len(buf)?;
            content_length(&buf[..head])?;
            text_message_len(buf)
        }
    }
}

struct Exchange {
    response: Vec<u8>,
    outcome: Outcome,
    rtt: Option<Duration>,
}

fn exchange(target: &TargetSpec, addr: SocketAddr, bytes: &[u8]) -> Result<Exchange, InjectError> {
    let done = |outcome| Ok(Exchange {
        response: Vec::new(),
        outcome,
        rtt: None,
    });
    let mut stream = match TcpStream::connect_timeout(&addr, target.connect_timeout) {
        Ok(s) => s,
        Err(e) if e.kind() == ErrorKind::ConnectionRefused => return done(Outcome::ConnectionRefused),
        Err(e) if is_timeout(e.kind()) => return done(Outcome::Timeout),
        Err(e) if is_local(e.kind()) => return Err(InjectError::Local(e)),
        Err(_) => return done(Outcome::Reset),
    };
    let _ = stream.set_nodelay(true);
    stream
        .set_write_timeout(Some(target.read_timeout))
        .map_err(InjectError::Local)?;
    match stream.write_all(bytes) {
        Ok(()) => {}
        Err(e) if is_timeout(e.kind()) => return done(Outcome::Timeout),
        Err(_) => return done(Outcome::Reset),
    }
    let _ = stream.shutdown(Shutdown::Write);
    let sent_at = Instant::now();
    let deadline = sent_at + target.read_timeout;

    let mut response = Vec::new();
    let mut rtt = None;
    let mut chunk = [0u8; 8192];
    let mut timed_out = false;
    loop {
        let now = Instant::now();
        if now >= deadline {
            timed_out = true;
            break;
        }
        stream
            .set_read_timeout(Some(deadline - now))
            .map_err(InjectError::Local)?;
        match stream.read(&mut chunk) {
            Ok(0) => break,
            Ok(n) => {
                rtt.get_or_insert_with(|| sent_at.elapsed());
                response.extend_from_slice(&chunk[..n]);
                if response.len() >= MAX_RESPONSE {
                    response.truncate(MAX_RESPONSE);
                    break;
                }
                if let Some(len) = response_boundary(target.protocol, &response) {
                    response.truncate(len);
                    break;
                }
            }
            Err(e) if e.kind() == ErrorKind::Interrupted => continue,
            Err(e) if is_timeout(e.kind()) => {
                timed_out = true;
                break;
            }
            Err(_) => break,
        }
    }
    let outcome = match (response.is_empty(), timed_out) {
        (false, _) => Outcome::Responded,
        (true, true) => Outcome::Timeout,
        (true, false) => Outcome::Reset,
    };
    Ok(Exchange {
        response,
        outcome,
        rtt,
    })
}

/// Sends one payload over a fresh connection and collects the reply.
pub fn inject_one(
    target: &TargetSpec,
    mutant_id: usize,
    bytes: &[u8],
    structure_risk: bool,
) -> Result<ExchangeRecord, InjectError> {
    target.validate()?;
    let addr = target.resolve()?;
    inject_resolved(target, addr, mutant_id, bytes, structure_risk)
}

fn inject_resolved(
    target: &TargetSpec,
    addr: SocketAddr,
    mutant_id: usize,
    bytes: &[u8],
    structure_risk: bool,
) -> Result<ExchangeRecord, InjectError> {
    let started = Instant::now();
    let ex = exchange(target, addr, bytes)?;
    Ok(ExchangeRecord {
        mutant_id,
        sent_bytes: bytes.to_vec(),
        response_bytes: ex.response,
        outcome: ex.outcome,
        rtt: ex.rtt,
        structure_risk,
        started,
        finished: Instant::now(),
    })
}

/// A payload ready for the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Payload {
    pub mutant_id: usize,
    pub bytes: Vec<u8>,
    pub structure_risk: bool,
}

impl From<&MutantRequest> for Payload {
    fn from(m: &MutantRequest) -> Self {
        Payload {
            mutant_id: m.mutant_id,
            bytes: m.serialize(),
            structure_risk: m.structure_risk,
        }
    }
}

pub fn run_campaign(target: &TargetSpec, mutants: &[MutantRequest]) -> Result<Vec<ExchangeRecord>, InjectError> {
    let payloads: Vec<Payload> = mutants.iter().map(Payload::from).collect();
    run_payloads(target, &payloads)
}

/// Delivers every payload; output order follows input order.
pub fn run_payloads(target: &TargetSpec, payloads: &[Payload]) -> Result<Vec<ExchangeRecord>, InjectError> {
    target.validate()?;
    if payloads.is_empty() {
        return Ok(Vec::new());
    }
    let addr = target.resolve()?;
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let last_start: Mutex<Option<Instant>> = Mutex::new(None);
    let slots: Mutex<Vec<Option<ExchangeRecord>>> = Mutex::new(vec![None; payloads.len()]);
    let failure: Mutex<Option<InjectError>> = Mutex::new(None);
    let workers = target.max_parallel.min(payloads.len());

    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    return;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(p) = payloads.get(i) else {
                    return;
                };
                {
                    let mut last = last_start.lock().expect("pacing lock");
                    if let Some(prev) = *last {
                        let ready = prev + target.pacing;
                        let now = Instant::now();
                        if ready > now {
                            thread::sleep(ready - now);
                        }
                    }
                    *last = Some(Instant::now());
                }
                match inject_resolved(target, addr, p.mutant_id, &p.bytes, p.structure_risk) {
                    Ok(record) => slots.lock().expect("result lock")[i] = Some(record),
                    Err(e) => {
                        abort.store(true, Ordering::SeqCst);
                        failure.lock().expect("error lock").get_or_insert(e);
                        return;
                    }
                }
            });
        }
    });

    if let Some(e) = failure.into_inner().expect("error lock") {
        return Err(e);
    }
    Ok(slots
        .into_inner()
        .expect("result lock")
        .into_iter()
        .map(|r| r.expect("every payload delivered"))
        .collect())
}
