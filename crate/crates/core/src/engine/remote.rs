//! TCP worker process and the coordinator's connection to it.

use std::io::{self, BufReader, BufWriter};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crate::raster::RasterGrid;

use super::op::{Operation, Payload};
use super::protocol::{read_message, write_message, JobMessage, Message, ProtocolError, PROTOCOL_VERSION};
use super::scheduler::{ExecError, Executor, RunOptions};
use super::EngineError;

#[derive(Debug, Clone, Default)]
pub struct WorkerOptions {
    /// Fault injection: after this many RESULT frames in total the worker
    /// drops every connection and stops listening, as if the process died.
    pub fail_after_results: Option<usize>,
}

struct ServerState {
    addr: SocketAddr,
    stopped: AtomicBool,
    results_sent: AtomicUsize,
    next_conn: AtomicUsize,
    conns: Mutex<Vec<(usize, TcpStream)>>,
    opts: WorkerOptions,
}

impl ServerState {
    fn stop(&self) {
        if self.stopped.swap(true, Ordering::SeqCst) {
            return;
        }
        for (_, c) in self.conns.lock().unwrap().drain(..) {
            let _ = c.shutdown(Shutdown::Both);
        }
        // Unblock accept().
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_secs(1));
    }
}

/// Handle to a running worker; dropping it leaves the worker running
/// until [`WorkerServer::shutdown`] or an injected failure.
pub struct WorkerServer {
    state: Arc<ServerState>,
    accept: Option<JoinHandle<()>>,
}

impl WorkerServer {
    pub fn local_addr(&self) -> SocketAddr {
        self.state.addr
    }

    pub fn results_sent(&self) -> usize {
        self.state.results_sent.load(Ordering::SeqCst)
    }

    /// Abruptly drops all connections, like a crashed process.
    pub fn kill(&self) {
        self.state.stop();
    }

    pub fn shutdown(mut self) {
        self.state.stop();
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }

    /// Blocks until the worker stops.
    pub fn wait(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

/// Binds `bind` (e.g. `0.0.0.0:7070`, port 0 for any) and serves jobs on
/// a background thread, one thread per coordinator connection.
pub fn serve_worker(bind: &str, opts: WorkerOptions) -> io::Result<WorkerServer> {
    let listener = TcpListener::bind(bind)?;
    let mut addr = listener.local_addr()?;
    if addr.ip().is_unspecified() {
        addr.set_ip(if addr.is_ipv4() {
            std::net::Ipv4Addr::LOCALHOST.into()
        } else {
            std::net::Ipv6Addr::LOCALHOST.into()
        });
    }
    let state = Arc::new(ServerState {
        addr,
        stopped: AtomicBool::new(false),
        results_sent: AtomicUsize::new(0),
        next_conn: AtomicUsize::new(0),
        conns: Mutex::new(Vec::new()),
        opts,
    });
    let st = Arc::clone(&state);
    let accept = thread::Builder::new().name("worker-accept".into()).spawn(move || {
        for stream in listener.incoming() {
            if st.stopped.load(Ordering::SeqCst) {
                break;
            }
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let id = st.next_conn.fetch_add(1, Ordering::SeqCst);
            if let Ok(c) = stream.try_clone() {
                st.conns.lock().unwrap().push((id, c));
            }
            let st = Arc::clone(&st);
            thread::spawn(move || {
                let peer = stream.peer_addr().ok();
                if let Err(e) = handle_connection(stream, &st) {
                    if !st.stopped.load(Ordering::SeqCst) {
                        log::debug!("connection {peer:?} closed: {e}");
                    }
                }
                // Close our registered clone too, or the peer never sees EOF.
                let mut conns = st.conns.lock().unwrap();
                if let Some(pos) = conns.iter().position(|(i, _)| *i == id) {
                    let _ = conns.swap_remove(pos).1.shutdown(Shutdown::Both);
                }
            });
        }
        log::info!("worker on {} stopped", st.addr);
    })?;
    log::info!("worker listening on {addr}");
    Ok(WorkerServer {
        state,
        accept: Some(accept),
    })
}

fn handle_connection(stream: TcpStream, st: &ServerState) -> Result<(), ProtocolError> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    match read_message(&mut reader)? {
        Message::Hello { version } if version == PROTOCOL_VERSION => write_message(&mut writer, &Message::HelloAck)?,
        Message::Hello { version } => {
            let reason = format!("unsupported protocol version {version} (worker speaks {PROTOCOL_VERSION})");
            write_message(&mut writer, &Message::Error { job_id: 0, reason: reason.clone() })?;
            return Err(ProtocolError::Invalid(reason));
        }
        other => {
            return Err(ProtocolError::Invalid(format!(
                "expected HELLO, got message type {}",
                other.msg_type()
            )))
        }
    }
    loop {
        let reply = match read_message(&mut reader)? {
            Message::Ping => Message::Pong,
            Message::Job(JobMessage { job_id, op, bands }) => {
                let refs: Vec<&RasterGrid> = bands.iter().collect();
                match op.execute(&refs) {
                    Ok(payload) => Message::Result {
                        job_id,
                        op_code: op.code(),
                        payload,
                    },
                    Err(reason) => Message::Error { job_id, reason },
                }
            }
            other => Message::Error {
                job_id: 0,
                reason: format!("unexpected message type {}", other.msg_type()),
            },
        };
        if st.stopped.load(Ordering::SeqCst) {
            return Ok(());
        }
        let is_result = matches!(reply, Message::Result { .. });
        write_message(&mut writer, &reply)?;
        if is_result {
            let sent = st.results_sent.fetch_add(1, Ordering::SeqCst) + 1;
            if st.opts.fail_after_results.is_some_and(|n| sent >= n) {
                log::warn!("fault injection: worker {} dying after {sent} result(s)", st.addr);
                st.stop();
                return Ok(());
            }
        }
    }
}

/// Coordinator-side connection to one worker slot.
pub struct RemoteExecutor {
    addr: String,
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    ping_timeout: Duration,
    heartbeat_after: Duration,
    job_timeout: Duration,
    last_seen: Instant,
}

impl RemoteExecutor {
    /// Connects and performs the HELLO handshake.
    pub fn connect(addr: &str, opts: &RunOptions) -> Result<Self, EngineError> {
        let sock = addr
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| EngineError::InvalidWorker(addr.to_string()))?;
        let stream = TcpStream::connect_timeout(&sock, opts.connect_timeout)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(opts.ping_timeout))?;
        let mut me = Self {
            addr: addr.to_string(),
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
            ping_timeout: opts.ping_timeout,
            heartbeat_after: opts.heartbeat_after,
            job_timeout: opts.job_timeout,
            last_seen: Instant::now(),
        };
        write_message(&mut me.writer, &Message::Hello { version: PROTOCOL_VERSION })?;
        match read_message(&mut me.reader)? {
            Message::HelloAck => Ok(me),
            Message::Error { reason, .. } => Err(EngineError::Handshake(reason)),
            other => Err(EngineError::Handshake(format!(
                "expected HELLO_ACK, got message type {}",
                other.msg_type()
            ))),
        }
    }

    pub fn addr(&self) -> &str {
        &self.addr
    }

    /// PING/PONG round trip bounded by the ping timeout.
    pub fn ping(&mut self) -> Result<(), EngineError> {
        self.reader.get_ref().set_read_timeout(Some(self.ping_timeout))?;
        write_message(&mut self.writer, &Message::Ping)?;
        match read_message(&mut self.reader)? {
            Message::Pong => {
                self.last_seen = Instant::now();
                Ok(())
            }
            other => Err(EngineError::Handshake(format!("expected PONG, got message type {}", other.msg_type()))),
        }
    }

    fn round_trip(&mut self, job_id: u64, op: &Operation, bands: Vec<RasterGrid>) -> Result<Message, EngineError> {
        if self.last_seen.elapsed() >= self.heartbeat_after {
            self.ping()?;
        }
        self.reader.get_ref().set_read_timeout(Some(self.job_timeout))?;
        let job = Message::Job(JobMessage {
            job_id,
            op: op.clone(),
            bands,
        });
        write_message(&mut self.writer, &job)?;
        let reply = read_message(&mut self.reader)?;
        self.last_seen = Instant::now();
        Ok(reply)
    }
}

impl Executor for RemoteExecutor {
    fn execute(&mut self, job_id: u64, op: &Operation, bands: Vec<RasterGrid>) -> Result<Payload, ExecError> {
        match self.round_trip(job_id, op, bands) {
            Ok(Message::Result { job_id: id, payload, .. }) if id == job_id => Ok(payload),
            Ok(Message::Error { job_id: id, reason }) if id == job_id => Err(ExecError::Job(reason)),
            Ok(other) => Err(ExecError::Connection(format!(
                "{}: unexpected reply type {} to job {job_id}",
                self.addr,
                other.msg_type()
            ))),
            Err(e) => Err(ExecError::Connection(format!("{}: {e}", self.addr))),
        }
    }
}
