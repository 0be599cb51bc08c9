//! TCP front end for a [`MockBehavior`].

use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crate::codec::tplink::complete_frame_len;
use crate::codec::text_message_len;
use crate::mock::behavior::{MockBehavior, Reply};
use crate::protocol::Protocol;

const READ_IDLE: Duration = Duration::from_millis(1500);
const MAX_REQUEST: usize = 1 << 20;

/// Running mock server; stops on [`ServerHandle::stop`] or drop.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    connections: Arc<AtomicU64>,
    log: Arc<Mutex<Vec<Vec<u8>>>>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn port(&self) -> u16 {
        self.addr.port()
    }

    /// Connections accepted so far.
    pub fn connections(&self) -> u64 {
        self.connections.load(Ordering::SeqCst)
    }

    /// Requests received, in arrival order.
    pub fn requests(&self) -> Vec<Vec<u8>> {
        self.log.lock().map(|l| l.clone()).unwrap_or_default()
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    /// Blocks until the accept loop exits.
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    fn shutdown(&mut self) {
        if let Some(t) = self.thread.take() {
            self.stop.store(true, Ordering::SeqCst);
            let _ = TcpStream::connect_timeout(&self.addr, Duration::from_millis(200));
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

pub fn serve(behavior: MockBehavior) -> io::Result<ServerHandle> {
    let bind = behavior.listen.clone();
    serve_on(behavior, &bind)
}

pub fn serve_on(behavior: MockBehavior, bind: &str) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(bind)?;
    let mut addr = listener.local_addr()?;
    if addr.ip().is_unspecified() {
        addr.set_ip([127, 0, 0, 1].into());
    }
    let stop = Arc::new(AtomicBool::new(false));
    let connections = Arc::new(AtomicU64::new(0));
    let log = Arc::new(Mutex::new(Vec::new()));
    let behavior = Arc::new(behavior);
    let thread = {
        let (stop, connections, log) = (stop.clone(), connections.clone(), log.clone());
        thread::spawn(move || {
            for stream in listener.incoming() {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let n = connections.fetch_add(1, Ordering::SeqCst) + 1;
                let (behavior, stop, log) = (behavior.clone(), stop.clone(), log.clone());
                thread::spawn(move || {
                    let _ = handle(&behavior, stream, n, &stop, &log);
                });
            }
        })
    };
    Ok(ServerHandle {
        addr,
        stop,
        connections,
        log,
        thread: Some(thread),
    })
}

fn handle(
    behavior: &MockBehavior,
    mut stream: TcpStream,
    connection: u64,
    stop: &AtomicBool,
    log: &Mutex<Vec<Vec<u8>>>,
) -> io::Result<()> {
    let request = read_request(&mut stream, behavior.protocol)?;
    if let Ok(mut l) = log.lock() {
        l.push(request.clone());
    }
    let reply = behavior
        .faults
        .fault_for(connection)
        .unwrap_or_else(|| behavior.respond(&request));
    match reply {
        Reply::Respond(bytes) => {
            stream.write_all(&bytes)?;
            stream.flush()?;
            stream.shutdown(Shutdown::Write)
        }
        Reply::Close => stream.shutdown(Shutdown::Both),
        Reply::Stall => {
            let until = Instant::now() + behavior.faults.stall_for;
            while Instant::now() < until && !stop.load(Ordering::SeqCst) {
                thread::sleep(Duration::from_millis(20));
            }
            Ok(())
        }
    }
}

fn read_request(stream: &mut TcpStream, protocol: Protocol) -> io::Result<Vec<u8>> {
    stream.set_read_timeout(Some(READ_IDLE))?;
    let mut buf = Vec::new();
    let mut chunk = [0u8; 4096];
    loop {
        let complete = match protocol {
            Protocol::TplinkSmarthome => complete_frame_len(&buf),
            _ => text_message_len(&buf),
        };
        if complete.is_some_and(|n| buf.len() >= n) || buf.len() > MAX_REQUEST {
            break;
        }
        match stream.read(&mut chunk) {
            Ok(0) => break,
            Ok(n) => buf.extend_from_slice(&chunk[..n]),
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => break,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(buf)
}
