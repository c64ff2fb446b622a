use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde_json::Value;

use super::wire::{Conn, Message, TaskDescriptor};
use super::{chunk_tasks, DistError};

pub const DEFAULT_CLIENT_PORT: u16 = 7890;
pub const DEFAULT_WORKER_PORT: u16 = 7891;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// Consecutive failed chunks after which a worker is dropped.
const MAX_CONSECUTIVE_FAILURES: u32 = 2;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub client_addr: String,
    pub worker_addr: String,
    /// Client ports of other servers requests may be forwarded to.
    pub peers: Vec<String>,
    /// How long a request waits for a free worker.
    pub timeout: Duration,
    /// Workers take chunks only after acknowledging the init command.
    pub inited: bool,
    pub id: Option<String>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            client_addr: format!("0.0.0.0:{DEFAULT_CLIENT_PORT}"),
            worker_addr: format!("0.0.0.0:{DEFAULT_WORKER_PORT}"),
            peers: Vec::new(),
            timeout: DEFAULT_TIMEOUT,
            inited: false,
            id: None,
        }
    }
}

impl ServerConfig {
    /// Loopback on ephemeral ports.
    pub fn local() -> Self {
        Self {
            client_addr: "127.0.0.1:0".into(),
            worker_addr: "127.0.0.1:0".into(),
            ..Self::default()
        }
    }

    pub fn with_timeout(mut self, t: Duration) -> Self {
        self.timeout = t;
        self
    }

    pub fn with_peers(mut self, peers: Vec<String>) -> Self {
        self.peers = peers;
        self
    }

    pub fn inited(mut self, yes: bool) -> Self {
        self.inited = yes;
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ServerStats {
    pub requests: u64,
    pub forwards_sent: u64,
    pub forwards_received: u64,
    /// Largest hop count seen on an incoming request.
    pub max_hops: u64,
    pub chunks_dispatched: u64,
    pub chunk_retries: u64,
    pub workers_removed: u64,
}

#[derive(Default)]
struct Counters {
    requests: AtomicU64,
    forwards_sent: AtomicU64,
    forwards_received: AtomicU64,
    max_hops: AtomicU64,
    chunks_dispatched: AtomicU64,
    chunk_retries: AtomicU64,
    workers_removed: AtomicU64,
}

struct WorkerRecord {
    id: u64,
    conn: Mutex<Option<Conn>>,
    busy: AtomicBool,
    removed: AtomicBool,
    initialized: AtomicBool,
    consecutive_failures: AtomicU32,
}

struct Peer {
    addr: String,
    link: Mutex<Option<(Conn, String)>>,
}

impl Peer {
    fn new(addr: &str) -> Arc<Self> {
        Arc::new(Self {
            addr: addr.to_owned(),
            link: Mutex::new(None),
        })
    }
}

#[derive(Default)]
struct CmdLog {
    init_stored: bool,
    /// Init, broadcast and run-on-all commands in arrival order, replayed
    /// to every worker that joins later.
    cmds: Vec<Message>,
}

struct Shared {
    id: String,
    timeout: Duration,
    inited: bool,
    workers: Mutex<Vec<Arc<WorkerRecord>>>,
    signal: Mutex<u64>,
    cond: Condvar,
    peers: Mutex<Vec<Arc<Peer>>>,
    log: Mutex<CmdLog>,
    stats: Counters,
    next_worker: AtomicU64,
    next_chunk: AtomicU64,
    next_request: AtomicU64,
    stop: AtomicBool,
    open: Mutex<Vec<TcpStream>>,
}

/// Accepts clients and workers on two ports and runs submitted batches on
/// the connected workers.
pub struct Server {
    shared: Arc<Shared>,
    client_addr: SocketAddr,
    worker_addr: SocketAddr,
    accept: Mutex<Vec<JoinHandle<()>>>,
}

impl Server {
    pub fn start(cfg: ServerConfig) -> Result<Self, DistError> {
        let clients = TcpListener::bind(&cfg.client_addr)?;
        let workers = TcpListener::bind(&cfg.worker_addr)?;
        let client_addr = clients.local_addr()?;
        let worker_addr = workers.local_addr()?;
        let id = cfg.id.clone().unwrap_or_else(|| format!("srv-{}-{}", std::process::id(), client_addr));
        let shared = Arc::new(Shared {
            id,
            timeout: cfg.timeout,
            inited: cfg.inited,
            workers: Mutex::new(Vec::new()),
            signal: Mutex::new(0),
            cond: Condvar::new(),
            peers: Mutex::new(cfg.peers.iter().map(|a| Peer::new(a)).collect()),
            log: Mutex::new(CmdLog::default()),
            stats: Counters::default(),
            next_worker: AtomicU64::new(0),
            next_chunk: AtomicU64::new(0),
            next_request: AtomicU64::new(0),
            stop: AtomicBool::new(false),
            open: Mutex::new(Vec::new()),
        });
        log::info!("server {} clients on {client_addr}, workers on {worker_addr}", shared.id);
        let accept = vec![
            spawn_acceptor(clients, Arc::clone(&shared), "swarmgrid-clients", |s, stream| s.serve_client(stream)),
            spawn_acceptor(workers, Arc::clone(&shared), "swarmgrid-workers", |s, stream| s.register_worker(stream)),
        ];
        Ok(Self {
            shared,
            client_addr,
            worker_addr,
            accept: Mutex::new(accept),
        })
    }

    pub fn id(&self) -> &str {
        &self.shared.id
    }

    /// Adds a server (its client address) that batches may be forwarded to.
    pub fn add_peer(&self, addr: &str) {
        self.shared.peers.lock().unwrap().push(Peer::new(addr));
    }

    pub fn client_addr(&self) -> SocketAddr {
        self.client_addr
    }

    pub fn worker_addr(&self) -> SocketAddr {
        self.worker_addr
    }

    /// Workers currently in the pool.
    pub fn worker_count(&self) -> usize {
        self.shared.workers.lock().unwrap().len()
    }

    pub fn initialized_workers(&self) -> usize {
        self.shared
            .workers
            .lock()
            .unwrap()
            .iter()
            .filter(|w| w.initialized.load(Ordering::SeqCst))
            .count()
    }

    /// Blocks until at least `n` workers are connected and idle.
    pub fn wait_for_workers(&self, n: usize, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        loop {
            let ready = self
                .shared
                .workers
                .lock()
                .unwrap()
                .iter()
                .filter(|w| !w.busy.load(Ordering::SeqCst))
                .count();
            if ready >= n {
                return true;
            }
            if Instant::now() >= deadline {
                return false;
            }
            std::thread::sleep(Duration::from_millis(5));
        }
    }

    pub fn stats(&self) -> ServerStats {
        let c = &self.shared.stats;
        let g = |a: &AtomicU64| a.load(Ordering::SeqCst);
        ServerStats {
            requests: g(&c.requests),
            forwards_sent: g(&c.forwards_sent),
            forwards_received: g(&c.forwards_received),
            max_hops: g(&c.max_hops),
            chunks_dispatched: g(&c.chunks_dispatched),
            chunk_retries: g(&c.chunk_retries),
            workers_removed: g(&c.workers_removed),
        }
    }

    /// Closes the listeners and every connection.
    pub fn shutdown(&self) {
        if self.shared.stop.swap(true, Ordering::SeqCst) {
            return;
        }
        // Wake the blocking accepts.
        let _ = TcpStream::connect(self.client_addr);
        let _ = TcpStream::connect(self.worker_addr);
        for h in std::mem::take(&mut *self.accept.lock().unwrap()) {
            let _ = h.join();
        }
        for w in std::mem::take(&mut *self.shared.workers.lock().unwrap()) {
            w.removed.store(true, Ordering::SeqCst);
            if let Some(c) = w.conn.lock().unwrap().take() {
                c.close();
            }
        }
        for s in std::mem::take(&mut *self.shared.open.lock().unwrap()) {
            let _ = s.shutdown(std::net::Shutdown::Both);
        }
        self.shared.notify();
    }

    /// Serves until the process is killed.
    pub fn join(&self) {
        for h in std::mem::take(&mut *self.accept.lock().unwrap()) {
            let _ = h.join();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn spawn_acceptor(
    listener: TcpListener,
    shared: Arc<Shared>,
    name: &str,
    handle: fn(&Arc<Shared>, TcpStream),
) -> JoinHandle<()> {
    std::thread::Builder::new()
        .name(name.into())
        .spawn(move || {
            for stream in listener.incoming() {
                if shared.stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let s = Arc::clone(&shared);
                std::thread::spawn(move || handle(&s, stream));
            }
        })
        .expect("spawn acceptor")
}

impl Shared {
    fn notify(&self) {
        *self.signal.lock().unwrap() += 1;
        self.cond.notify_all();
    }

    fn eligible(&self, w: &WorkerRecord) -> bool {
        !w.removed.load(Ordering::SeqCst) && (!self.inited || w.initialized.load(Ordering::SeqCst))
    }

    fn claim(&self, w: &WorkerRecord) -> bool {
        self.eligible(w) && w.busy.compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst).is_ok()
    }

    /// Waits until `w` is idle and claims it; false once it is removed.
    fn claim_blocking(&self, w: &WorkerRecord) -> bool {
        loop {
            if w.removed.load(Ordering::SeqCst) {
                return false;
            }
            if w.busy.compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst).is_ok() {
                return true;
            }
            let g = self.signal.lock().unwrap();
            let _ = self.cond.wait_timeout(g, Duration::from_millis(20)).unwrap();
        }
    }

    fn release(&self, w: &WorkerRecord) {
        w.busy.store(false, Ordering::SeqCst);
        self.notify();
    }

    fn remove(&self, w: &Arc<WorkerRecord>) {
        if w.removed.swap(true, Ordering::SeqCst) {
            return;
        }
        if let Some(c) = w.conn.lock().unwrap().take() {
            c.close();
        }
        self.workers.lock().unwrap().retain(|x| !Arc::ptr_eq(x, w));
        self.stats.workers_removed.fetch_add(1, Ordering::SeqCst);
        log::warn!("worker {} removed", w.id);
        self.notify();
    }

    fn exchange(&self, w: &WorkerRecord, msg: &Message) -> Result<Message, DistError> {
        match w.conn.lock().unwrap().as_mut() {
            Some(c) => c.call(msg),
            None => Err(DistError::ConnectionLost),
        }
    }

    fn register_worker(self: &Arc<Self>, stream: TcpStream) {
        let mut conn = Conn::new(stream);
        match conn.recv() {
            Ok(Message::HelloWorker { threads }) => {
                if conn
                    .send(&Message::Welcome {
                        server_id: self.id.clone(),
                    })
                    .is_err()
                {
                    return;
                }
                log::info!("worker joined with {threads} threads");
            }
            _ => {
                conn.close();
                return;
            }
        }
        let rec = Arc::new(WorkerRecord {
            id: self.next_worker.fetch_add(1, Ordering::SeqCst),
            conn: Mutex::new(Some(conn)),
            busy: AtomicBool::new(true),
            removed: AtomicBool::new(false),
            initialized: AtomicBool::new(false),
            consecutive_failures: AtomicU32::new(0),
        });
        let replay = {
            let log = self.log.lock().unwrap();
            self.workers.lock().unwrap().push(Arc::clone(&rec));
            log.cmds.clone()
        };
        for cmd in &replay {
            if !self.deliver_cmd(&rec, cmd) && matches!(cmd, Message::InitCmd { .. }) {
                self.remove(&rec);
                return;
            }
        }
        self.release(&rec);
    }

    /// Sends one command to a claimed worker; true on `OkReply`.
    fn deliver_cmd(&self, w: &Arc<WorkerRecord>, cmd: &Message) -> bool {
        match self.exchange(w, cmd) {
            Ok(Message::OkReply) => {
                if matches!(cmd, Message::InitCmd { .. }) {
                    w.initialized.store(true, Ordering::SeqCst);
                    self.notify();
                }
                true
            }
            Ok(Message::FailedReply { reason }) => {
                log::warn!("worker {} rejected {}: {reason}", w.id, cmd.kind_name());
                false
            }
            Ok(other) => {
                log::warn!("worker {} sent {} to {}", w.id, other.kind_name(), cmd.kind_name());
                self.remove(w);
                false
            }
            Err(_) => {
                self.remove(w);
                false
            }
        }
    }

    /// Appends `cmd` to the replay log and delivers it to every current
    /// worker in parallel. Returns the ids of workers that failed it.
    fn broadcast(self: &Arc<Self>, cmd: Message) -> Vec<u64> {
        let targets = {
            let mut log = self.log.lock().unwrap();
            log.cmds.push(cmd.clone());
            self.workers.lock().unwrap().clone()
        };
        let is_init = matches!(cmd, Message::InitCmd { .. });
        std::thread::scope(|s| {
            let handles: Vec<_> = targets
                .iter()
                .map(|w| {
                    let cmd = &cmd;
                    s.spawn(move || {
                        if !self.claim_blocking(w) {
                            return Some(w.id);
                        }
                        let ok = self.deliver_cmd(w, cmd);
                        if !ok && is_init {
                            self.remove(w);
                        } else {
                            self.release(w);
                        }
                        (!ok).then_some(w.id)
                    })
                })
                .collect();
            handles.into_iter().filter_map(|h| h.join().unwrap()).collect()
        })
    }

    fn handle_init(self: &Arc<Self>, cmd: TaskDescriptor, ok_reply_requested: bool) -> Message {
        {
            let mut log = self.log.lock().unwrap();
            if log.init_stored {
                log::info!("init command already stored; ignoring a later one");
                return Message::OkReply;
            }
            log.init_stored = true;
        }
        let msg = Message::InitCmd {
            cmd,
            ok_reply_requested,
        };
        let me = Arc::clone(self);
        // Slow workers finish initializing in the background.
        std::thread::spawn(move || {
            me.broadcast(msg);
        });
        if !ok_reply_requested {
            return Message::OkReply;
        }
        let deadline = Instant::now() + self.timeout;
        loop {
            let gen = *self.signal.lock().unwrap();
            if self
                .workers
                .lock()
                .unwrap()
                .iter()
                .any(|w| w.initialized.load(Ordering::SeqCst))
            {
                return Message::OkReply;
            }
            let now = Instant::now();
            if now >= deadline || self.stop.load(Ordering::SeqCst) {
                return Message::failed("no worker initialized before the timeout");
            }
            let g = self.signal.lock().unwrap();
            if *g == gen {
                let _ = self.cond.wait_timeout(g, deadline - now).unwrap();
            }
        }
    }

    fn handle_cmd(self: &Arc<Self>, cmd: Message) -> Message {
        let failed = self.broadcast(cmd);
        if failed.is_empty() {
            Message::OkReply
        } else {
            Message::failed(format!("command failed on workers {failed:?}"))
        }
    }

    fn serve_client(self: &Arc<Self>, stream: TcpStream) {
        if let Ok(s) = stream.try_clone() {
            self.open.lock().unwrap().push(s);
        }
        let mut conn = Conn::new(stream);
        let mut remote_server: Option<String> = None;
        loop {
            let msg = match conn.recv() {
                Ok(m) => m,
                Err(_) => break,
            };
            let reply = match msg {
                Message::HelloClient { server_id } => {
                    remote_server = server_id;
                    Message::Welcome {
                        server_id: self.id.clone(),
                    }
                }
                Message::SubmitBatch { request_id, tasks } => {
                    self.stats.requests.fetch_add(1, Ordering::SeqCst);
                    match self.execute(tasks, remote_server.as_deref(), 0) {
                        Ok(results) => Message::BatchResult { request_id, results },
                        Err(e) => Message::failed(e),
                    }
                }
                Message::ForwardBatch {
                    origin_server_id,
                    request_id,
                    tasks,
                    hops,
                } => {
                    self.stats.requests.fetch_add(1, Ordering::SeqCst);
                    self.stats.forwards_received.fetch_add(1, Ordering::SeqCst);
                    self.stats.max_hops.fetch_max(hops as u64, Ordering::SeqCst);
                    match self.execute(tasks, Some(&origin_server_id), hops) {
                        Ok(results) => Message::BatchResult { request_id, results },
                        Err(e) => Message::failed(e),
                    }
                }
                Message::InitCmd {
                    cmd,
                    ok_reply_requested,
                } => self.handle_init(cmd, ok_reply_requested),
                m @ (Message::BroadcastCmd { .. } | Message::RunOnAllThreadsCmd { .. }) => self.handle_cmd(m),
                other => Message::failed(format!("unexpected {} from a client", other.kind_name())),
            };
            if conn.send(&reply).is_err() {
                break;
            }
        }
    }

    fn any_free(&self) -> bool {
        self.workers
            .lock()
            .unwrap()
            .iter()
            .any(|w| self.eligible(w) && !w.busy.load(Ordering::SeqCst))
    }

    /// Runs a batch: forwarded to a peer when no local worker is free and
    /// the request has not been forwarded yet, otherwise split over local
    /// workers.
    fn execute(&self, tasks: Vec<TaskDescriptor>, origin: Option<&str>, hops: u32) -> Result<Vec<Value>, String> {
        if tasks.is_empty() {
            return Ok(Vec::new());
        }
        if hops == 0 && !self.any_free() {
            if let Some(r) = self.forward(&tasks, origin) {
                return Ok(r);
            }
        }
        self.dispatch_local(tasks)
    }

    fn forward(&self, tasks: &[TaskDescriptor], origin: Option<&str>) -> Option<Vec<Value>> {
        let peers = self.peers.lock().unwrap().clone();
        for peer in &peers {
            let Ok(mut link) = peer.link.try_lock() else { continue };
            if link.is_none() {
                match connect_peer(&peer.addr, &self.id) {
                    Ok(l) => *link = Some(l),
                    Err(e) => {
                        log::debug!("peer {} unreachable: {e}", peer.addr);
                        continue;
                    }
                }
            }
            let (conn, peer_id) = link.as_mut().expect("link set above");
            if Some(peer_id.as_str()) == origin || *peer_id == self.id {
                continue;
            }
            self.stats.forwards_sent.fetch_add(1, Ordering::SeqCst);
            let request_id = self.next_request.fetch_add(1, Ordering::SeqCst);
            let msg = Message::ForwardBatch {
                origin_server_id: self.id.clone(),
                request_id,
                tasks: tasks.to_vec(),
                hops: 1,
            };
            match conn.call(&msg) {
                Ok(Message::BatchResult { results, .. }) if results.len() == tasks.len() => return Some(results),
                Ok(Message::FailedReply { reason }) => log::info!("peer {peer_id} failed a forwarded batch: {reason}"),
                Ok(other) => {
                    log::warn!("peer {peer_id} answered {}", other.kind_name());
                    *link = None;
                }
                Err(_) => *link = None,
            }
        }
        None
    }

    fn dispatch_local(&self, tasks: Vec<TaskDescriptor>) -> Result<Vec<Value>, String> {
        let n_workers = self
            .workers
            .lock()
            .unwrap()
            .iter()
            .filter(|w| self.eligible(w))
            .count()
            .max(1);
        let mut rest = tasks.as_slice();
        let mut chunks = Vec::new();
        for size in chunk_tasks(tasks.len(), n_workers) {
            let (head, tail) = rest.split_at(size);
            chunks.push(head);
            rest = tail;
        }
        let outcomes: Vec<Result<Vec<Value>, String>> = std::thread::scope(|s| {
            let handles: Vec<_> = chunks
                .iter()
                .enumerate()
                .map(|(i, c)| s.spawn(move || self.run_chunk(i, c)))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let mut out = Vec::with_capacity(tasks.len());
        for o in outcomes {
            out.extend(o?);
        }
        Ok(out)
    }

    fn run_chunk(&self, start: usize, tasks: &[TaskDescriptor]) -> Result<Vec<Value>, String> {
        let chunk_id = self.next_chunk.fetch_add(1, Ordering::SeqCst);
        let msg = Message::ExecuteChunk {
            chunk_id,
            tasks: tasks.to_vec(),
        };
        let mut attempts = 0;
        loop {
            let w = self.acquire(start)?;
            self.stats.chunks_dispatched.fetch_add(1, Ordering::SeqCst);
            let reason = match self.exchange(&w, &msg) {
                Ok(Message::ChunkResult { chunk_id: c, results }) if c == chunk_id && results.len() == tasks.len() => {
                    w.consecutive_failures.store(0, Ordering::SeqCst);
                    self.release(&w);
                    return Ok(results);
                }
                Ok(Message::FailedReply { reason }) => {
                    let n = w.consecutive_failures.fetch_add(1, Ordering::SeqCst) + 1;
                    if n >= MAX_CONSECUTIVE_FAILURES {
                        self.remove(&w);
                    } else {
                        self.release(&w);
                    }
                    reason
                }
                Ok(other) => {
                    self.remove(&w);
                    format!("worker answered {}", other.kind_name())
                }
                Err(e) => {
                    self.remove(&w);
                    e.to_string()
                }
            };
            attempts += 1;
            if attempts >= 2 {
                return Err(format!("chunk {chunk_id} failed after retry: {reason}"));
            }
            self.stats.chunk_retries.fetch_add(1, Ordering::SeqCst);
            log::info!("retrying chunk {chunk_id}: {reason}");
        }
    }

    /// Claims the first worker, scanning from `start`, that answers an
    /// availability query with a free thread.
    fn acquire(&self, start: usize) -> Result<Arc<WorkerRecord>, String> {
        let deadline = Instant::now() + self.timeout;
        loop {
            let gen = *self.signal.lock().unwrap();
            let list = self.workers.lock().unwrap().clone();
            for k in 0..list.len() {
                let w = &list[(start + k) % list.len()];
                if !self.claim(w) {
                    continue;
                }
                match self.exchange(w, &Message::AvailabilityQuery) {
                    Ok(Message::AvailabilityReply { free_threads }) if free_threads >= 1 => return Ok(Arc::clone(w)),
                    Ok(Message::AvailabilityReply { .. }) => self.release(w),
                    _ => self.remove(w),
                }
            }
            if self.stop.load(Ordering::SeqCst) {
                return Err("server shutting down".into());
            }
            let now = Instant::now();
            if now >= deadline {
                return Err("timed out waiting for an available worker".into());
            }
            let g = self.signal.lock().unwrap();
            if *g == gen {
                let _ = self.cond.wait_timeout(g, deadline - now).unwrap();
            }
        }
    }
}

fn connect_peer(addr: &str, my_id: &str) -> Result<(Conn, String), DistError> {
    let mut c = Conn::connect(addr)?;
    match c.call(&Message::HelloClient {
        server_id: Some(my_id.to_owned()),
    })? {
        Message::Welcome { server_id } => Ok((c, server_id)),
        other => Err(DistError::Protocol(format!("expected Welcome, got {}", other.kind_name()))),
    }
}
