use std::net::{Shutdown, TcpStream};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde_json::Value;

use super::registry::{TaskContext, TaskRegistry};
use super::wire::{Conn, Message, TaskDescriptor};
use super::DistError;
use crate::exec_local::{BatchExecutor, FailedResult, FnTask};

#[derive(Debug, Default)]
struct Counters {
    chunks: AtomicU64,
    tasks: AtomicU64,
    cmds: AtomicU64,
}

/// A worker node: executes chunks sent by its server on a local pool.
pub struct Worker {
    stream: TcpStream,
    counters: Arc<Counters>,
    handle: Option<JoinHandle<Result<(), DistError>>>,
    server_id: String,
}

impl Worker {
    /// Connects, handshakes and serves on a background thread.
    pub fn spawn(addr: &str, threads: usize, registry: TaskRegistry) -> Result<Self, DistError> {
        let (conn, server_id) = handshake(addr, threads)?;
        let stream = conn.try_clone_stream()?;
        let counters = Arc::new(Counters::default());
        let c = Arc::clone(&counters);
        let handle = std::thread::Builder::new()
            .name("swarmgrid-worker".into())
            .spawn(move || serve(conn, threads, Arc::new(registry), &c))?;
        Ok(Self {
            stream,
            counters,
            handle: Some(handle),
            server_id,
        })
    }

    /// Connects and serves on the calling thread until the connection
    /// drops.
    pub fn run(addr: &str, threads: usize, registry: TaskRegistry) -> Result<(), DistError> {
        let (conn, server_id) = handshake(addr, threads)?;
        log::info!("worker connected to server {server_id}");
        serve(conn, threads, Arc::new(registry), &Counters::default())
    }

    pub fn server_id(&self) -> &str {
        &self.server_id
    }

    pub fn chunks_executed(&self) -> u64 {
        self.counters.chunks.load(Ordering::SeqCst)
    }

    pub fn tasks_executed(&self) -> u64 {
        self.counters.tasks.load(Ordering::SeqCst)
    }

    pub fn cmds_executed(&self) -> u64 {
        self.counters.cmds.load(Ordering::SeqCst)
    }

    /// Drops the connection abruptly, as a crashed worker would.
    pub fn kill(&self) {
        let _ = self.stream.shutdown(Shutdown::Both);
    }

    pub fn join(mut self) -> Result<(), DistError> {
        self.handle.take().map_or(Ok(()), |h| h.join().unwrap_or(Err(DistError::ConnectionLost)))
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        self.kill();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn handshake(addr: &str, threads: usize) -> Result<(Conn, String), DistError> {
    let mut conn = Conn::connect(addr)?;
    match conn.call(&Message::HelloWorker { threads })? {
        Message::Welcome { server_id } => Ok((conn, server_id)),
        other => Err(DistError::Protocol(format!("expected Welcome, got {}", other.kind_name()))),
    }
}

fn serve(mut conn: Conn, threads: usize, registry: Arc<TaskRegistry>, counters: &Counters) -> Result<(), DistError> {
    let pool = BatchExecutor::new(threads.max(1));
    let ctx = Arc::new(TaskContext::default());
    loop {
        let msg = match conn.recv() {
            Ok(m) => m,
            Err(DistError::ConnectionLost) => return Ok(()),
            Err(e) => return Err(e),
        };
        let reply = match msg {
            Message::AvailabilityQuery => Message::AvailabilityReply {
                free_threads: pool.size(),
            },
            Message::ExecuteChunk { chunk_id, tasks } => {
                let n = tasks.len() as u64;
                let r = match execute_chunk(&pool, &registry, &ctx, tasks) {
                    Ok(results) => Message::ChunkResult { chunk_id, results },
                    Err(reason) => Message::failed(reason),
                };
                counters.chunks.fetch_add(1, Ordering::SeqCst);
                counters.tasks.fetch_add(n, Ordering::SeqCst);
                r
            }
            Message::InitCmd { cmd, .. } | Message::BroadcastCmd { cmd } => {
                counters.cmds.fetch_add(1, Ordering::SeqCst);
                match registry.call(&cmd.kind, &cmd.payload, &ctx) {
                    Ok(_) => Message::OkReply,
                    Err(e) => Message::failed(e),
                }
            }
            Message::RunOnAllThreadsCmd { cmd } => {
                counters.cmds.fetch_add(1, Ordering::SeqCst);
                match registry.handler(&cmd.kind) {
                    None => Message::failed(format!("UnknownTaskKind: {}", cmd.kind)),
                    Some(h) => {
                        let ctx = Arc::clone(&ctx);
                        let payload = cmd.payload;
                        match pool.execute_on_all_threads(Arc::new(move || {
                            h(&payload, &ctx).map(|_| ()).map_err(FailedResult::new)
                        })) {
                            Ok(()) => Message::OkReply,
                            Err(e) => Message::failed(e.to_string()),
                        }
                    }
                }
            }
            other => Message::failed(format!("unexpected {} at a worker", other.kind_name())),
        };
        match conn.send(&reply) {
            Ok(()) => {}
            Err(DistError::ConnectionLost) => return Ok(()),
            Err(e) => return Err(e),
        }
    }
}

fn execute_chunk(
    pool: &BatchExecutor,
    registry: &Arc<TaskRegistry>,
    ctx: &Arc<TaskContext>,
    tasks: Vec<TaskDescriptor>,
) -> Result<Vec<Value>, String> {
    if let Some(t) = tasks.iter().find(|t| !registry.contains(&t.kind)) {
        return Err(format!("UnknownTaskKind: {}", t.kind));
    }
    let jobs: Vec<_> = tasks
        .into_iter()
        .map(|t| {
            let registry = Arc::clone(registry);
            let ctx = Arc::clone(ctx);
            FnTask(move || registry.call(&t.kind, &t.payload, &ctx).map_err(FailedResult::new))
        })
        .collect();
    pool.execute_batch(jobs)
        .map_err(|e| e.to_string())?
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.reason)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec_dist::registry::evalfn_payload;
    use crate::exec_dist::wire::{read_frame, write_frame};
    use serde_json::json;
    use std::net::TcpListener;

    /// Plays the server side of one worker connection.
    fn fake_server(threads: usize) -> (TcpStream, Worker) {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = l.local_addr().unwrap().to_string();
        let accept = std::thread::spawn(move || {
            let (mut s, _) = l.accept().unwrap();
            assert_eq!(read_frame(&mut s).unwrap(), Message::HelloWorker { threads });
            write_frame(&mut s, &Message::Welcome { server_id: "fake".into() }).unwrap();
            s
        });
        let w = Worker::spawn(&addr, threads, TaskRegistry::standard()).unwrap();
        (accept.join().unwrap(), w)
    }

    fn call(s: &mut TcpStream, m: &Message) -> Message {
        write_frame(s, m).unwrap();
        read_frame(s).unwrap()
    }

    #[test]
    fn idle_availability_is_pool_size() {
        let (mut s, w) = fake_server(4);
        assert_eq!(w.server_id(), "fake");
        assert_eq!(call(&mut s, &Message::AvailabilityQuery), Message::AvailabilityReply { free_threads: 4 });
    }

    #[test]
    fn unknown_kind_fails_whole_chunk() {
        let (mut s, w) = fake_server(2);
        let r = call(
            &mut s,
            &Message::ExecuteChunk {
                chunk_id: 3,
                tasks: vec![TaskDescriptor::new("noop", Value::Null), TaskDescriptor::new("mystery", Value::Null)],
            },
        );
        let Message::FailedReply { reason } = r else { panic!("{r:?}") };
        assert!(reason.contains("UnknownTaskKind"));
        assert_eq!(w.tasks_executed(), 2);
    }

    #[test]
    fn chunk_results_match_local_in_order() {
        let (mut s, _w) = fake_server(4);
        let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 0.37 - 1.0, 2.0 - i as f64 * 0.11]).collect();
        let tasks = xs
            .iter()
            .map(|x| TaskDescriptor::new("evalfn", evalfn_payload("ackley", x, None)))
            .collect();
        let r = call(&mut s, &Message::ExecuteChunk { chunk_id: 9, tasks });
        let want: Vec<Value> = xs.iter().map(|x| json!(crate::benchfns::ackley(x))).collect();
        assert_eq!(r, Message::ChunkResult { chunk_id: 9, results: want });
    }

    #[test]
    fn run_on_all_threads_reaches_each_thread() {
        let (mut s, _w) = fake_server(3);
        let p = crate::params::ParamMap::new().with("k", 5);
        assert_eq!(
            call(
                &mut s,
                &Message::RunOnAllThreadsCmd {
                    cmd: TaskDescriptor::new("threadparams", serde_json::to_value(&p).unwrap())
                }
            ),
            Message::OkReply
        );
        let tasks = (0..12).map(|_| TaskDescriptor::new("getparam", json!("k"))).collect();
        let Message::ChunkResult { results, .. } = call(&mut s, &Message::ExecuteChunk { chunk_id: 0, tasks }) else {
            panic!()
        };
        assert!(results.iter().all(|v| v == &json!({"t": "int", "v": 5})), "{results:?}");
    }
}
