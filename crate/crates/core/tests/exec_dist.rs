use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use swarmgrid::benchfns;
use swarmgrid::exec_dist::{evalfn_payload, Client, DistError, Server, ServerConfig, TaskDescriptor, TaskRegistry, Worker};
use swarmgrid::ParamMap;

const WAIT: Duration = Duration::from_secs(10);

fn server(timeout_ms: u64) -> Server {
    Server::start(ServerConfig::local().with_timeout(Duration::from_millis(timeout_ms))).unwrap()
}

fn waddr(s: &Server) -> String {
    s.worker_addr().to_string()
}

fn caddr(s: &Server) -> String {
    s.client_addr().to_string()
}

fn eval_tasks(xs: &[Vec<f64>]) -> Vec<TaskDescriptor> {
    xs.iter()
        .map(|x| TaskDescriptor::new("evalfn", evalfn_payload("rastrigin", x, None)))
        .collect()
}

fn points(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| vec![i as f64 * 0.173 - 2.0, 1.5 - i as f64 * 0.091]).collect()
}

fn local(xs: &[Vec<f64>]) -> Vec<Value> {
    xs.iter().map(|x| json!(benchfns::rastrigin(x))).collect()
}

/// Registry with `echo` (returns `payload.v` after `payload.ms`) and a
/// `count` command that bumps `counter`.
fn test_registry(counter: Arc<AtomicUsize>) -> TaskRegistry {
    let mut r = TaskRegistry::standard();
    r.register("echo", |p, _| {
        if let Some(ms) = p.get("ms").and_then(Value::as_u64) {
            std::thread::sleep(Duration::from_millis(ms));
        }
        Ok(p["v"].clone())
    });
    r.register("count", move |_, _| {
        counter.fetch_add(1, Ordering::SeqCst);
        Ok(Value::Null)
    });
    r
}

fn echo(v: usize, ms: u64) -> TaskDescriptor {
    TaskDescriptor::new("echo", json!({"v": v, "ms": ms}))
}

#[test]
fn nine_tasks_over_three_workers_one_chunk_each() {
    let s = server(5_000);
    let ws: Vec<Worker> = (0..3)
        .map(|_| Worker::spawn(&waddr(&s), 1, TaskRegistry::standard()).unwrap())
        .collect();
    assert!(s.wait_for_workers(3, WAIT));
    let mut c = Client::connect(&caddr(&s)).unwrap();
    let xs = points(9);
    assert_eq!(c.submit_work(eval_tasks(&xs)).unwrap(), local(&xs));
    for w in &ws {
        assert_eq!(w.chunks_executed(), 1);
        assert_eq!(w.tasks_executed(), 3);
    }
}

#[test]
fn results_keep_task_order_for_any_batch_size() {
    let s = server(5_000);
    let _ws: Vec<Worker> = (0..3)
        .map(|k| Worker::spawn(&waddr(&s), k + 1, TaskRegistry::standard()).unwrap())
        .collect();
    assert!(s.wait_for_workers(3, WAIT));
    let mut c = Client::connect(&caddr(&s)).unwrap();
    for n in [1, 2, 3, 4, 7, 10, 31] {
        let xs = points(n);
        assert_eq!(c.submit_work(eval_tasks(&xs)).unwrap(), local(&xs), "n={n}");
    }
    assert!(c.submit_work(Vec::new()).unwrap().is_empty());
}

#[test]
fn chunks_run_concurrently_on_separate_workers() {
    let s = server(5_000);
    let ws: Vec<Worker> = (0..4)
        .map(|_| Worker::spawn(&waddr(&s), 1, test_registry(Arc::default())).unwrap())
        .collect();
    assert!(s.wait_for_workers(4, WAIT));
    let mut c = Client::connect(&caddr(&s)).unwrap();
    let t = Instant::now();
    let r = c.submit_work((0..4).map(|i| echo(i, 300)).collect()).unwrap();
    assert_eq!(r, (0..4).map(|i| json!(i)).collect::<Vec<_>>());
    assert!(t.elapsed() < Duration::from_millis(1_100), "{:?}", t.elapsed());
    assert!(ws.iter().all(|w| w.chunks_executed() == 1));
}

#[test]
fn no_workers_times_out_with_failed_reply() {
    let s = server(200);
    let mut c = Client::connect(&caddr(&s)).unwrap();
    match c.submit_work(eval_tasks(&points(2))) {
        Err(DistError::ServerFailedReply(r)) => assert!(r.contains("timed out"), "{r}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn a_failure_then_success_keeps_the_worker() {
    let calls = Arc::new(AtomicUsize::new(0));
    let mut reg = TaskRegistry::standard();
    let k = Arc::clone(&calls);
    // Fails on odd-numbered calls: fail, ok, fail, ok.
    reg.register("flaky", move |_, _| {
        if k.fetch_add(1, Ordering::SeqCst) % 2 == 0 {
            Err("flaky".into())
        } else {
            Ok(json!(1))
        }
    });
    let s = server(2_000);
    let _w = Worker::spawn(&waddr(&s), 1, reg).unwrap();
    assert!(s.wait_for_workers(1, WAIT));
    let mut c = Client::connect(&caddr(&s)).unwrap();
    for _ in 0..2 {
        assert_eq!(c.submit_work(vec![TaskDescriptor::new("flaky", Value::Null)]).unwrap(), vec![json!(1)]);
    }
    assert_eq!(s.worker_count(), 1);
    assert_eq!(s.stats().chunk_retries, 2);
    assert_eq!(s.stats().workers_removed, 0);
}

#[test]
fn two_consecutive_failures_remove_the_worker() {
    let s = server(300);
    let _w = Worker::spawn(&waddr(&s), 1, TaskRegistry::standard()).unwrap();
    assert!(s.wait_for_workers(1, WAIT));
    let mut c = Client::connect(&caddr(&s)).unwrap();
    let r = c.submit_work(vec![TaskDescriptor::new("fail", json!("nope"))]);
    assert!(matches!(r, Err(DistError::ServerFailedReply(_))), "{r:?}");
    assert_eq!(s.worker_count(), 0);
    assert_eq!(s.stats().workers_removed, 1);
    // Removal is terminal: the next batch finds no worker.
    assert!(c.submit_work(eval_tasks(&points(1))).is_err());
}

#[test]
fn unknown_kind_fails_the_request() {
    let s = server(300);
    let _ws: Vec<Worker> = (0..2)
        .map(|_| Worker::spawn(&waddr(&s), 1, TaskRegistry::standard()).unwrap())
        .collect();
    assert!(s.wait_for_workers(2, WAIT));
    let mut c = Client::connect(&caddr(&s)).unwrap();
    match c.submit_work(vec![TaskDescriptor::new("mystery", Value::Null)]) {
        Err(DistError::ServerFailedReply(r)) => assert!(r.contains("UnknownTaskKind"), "{r}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn killed_worker_chunk_is_rerun_elsewhere() {
    let s = server(5_000);
    let a = Worker::spawn(&waddr(&s), 1, test_registry(Arc::default())).unwrap();
    let b = Worker::spawn(&waddr(&s), 1, test_registry(Arc::default())).unwrap();
    assert!(s.wait_for_workers(2, WAIT));
    let addr = caddr(&s);
    let job = std::thread::spawn(move || {
        let mut c = Client::connect(&addr).unwrap();
        c.submit_work((0..6).map(|i| echo(i, 150)).collect())
    });
    std::thread::sleep(Duration::from_millis(100));
    a.kill();
    let r = job.join().unwrap().unwrap();
    assert_eq!(r, (0..6).map(|i| json!(i)).collect::<Vec<_>>());
    assert_eq!(s.worker_count(), 1);
    assert_eq!(s.stats().chunk_retries, 1);
    assert_eq!(b.chunks_executed(), 2);
}

#[test]
fn saturated_server_forwards_to_idle_peer() {
    let s2 = server(5_000);
    let _w = Worker::spawn(&waddr(&s2), 2, TaskRegistry::standard()).unwrap();
    assert!(s2.wait_for_workers(1, WAIT));
    let s1 = Server::start(ServerConfig::local().with_timeout(Duration::from_millis(500)).with_peers(vec![caddr(&s2)]))
        .unwrap();
    let mut c = Client::connect(&caddr(&s1)).unwrap();
    let xs = points(5);
    assert_eq!(c.submit_work(eval_tasks(&xs)).unwrap(), local(&xs));
    assert_eq!(s1.stats().forwards_sent, 1);
    assert_eq!(s2.stats().forwards_received, 1);
    assert_eq!(s2.stats().max_hops, 1);
}

#[test]
fn no_ping_pong_between_two_saturated_servers() {
    let s1 = server(200);
    let s2 = server(200);
    s1.add_peer(&caddr(&s2));
    s2.add_peer(&caddr(&s1));
    let mut c = Client::connect(&caddr(&s1)).unwrap();
    assert!(matches!(c.submit_work(eval_tasks(&points(3))), Err(DistError::ServerFailedReply(_))));
    let (a, b) = (s1.stats(), s2.stats());
    assert_eq!(a.forwards_sent, 1);
    assert_eq!(a.forwards_received, 0);
    assert_eq!(b.forwards_received, 1);
    assert_eq!(b.forwards_sent, 0);
    assert_eq!(b.max_hops, 1);
}

#[test]
fn inited_server_installs_params_on_present_and_future_workers() {
    let s = Server::start(ServerConfig::local().inited(true).with_timeout(Duration::from_secs(5))).unwrap();
    // Joins before any client: idles until the init command arrives.
    let a = Worker::spawn(&waddr(&s), 2, TaskRegistry::standard()).unwrap();
    assert!(s.wait_for_workers(1, WAIT));
    assert_eq!(s.initialized_workers(), 0);

    let spec = benchfns::ShiftSpec {
        o: vec![3.0, -4.0, 0.5],
        bias: 390.0,
    };
    let mut p = ParamMap::new();
    spec.write_params(&mut p);
    let mut c = Client::connect(&caddr(&s)).unwrap();
    c.submit_init_cmd(TaskDescriptor::new("initparams", serde_json::to_value(&p).unwrap()), true)
        .unwrap();
    assert!(s.initialized_workers() >= 1);
    assert_eq!(
        c.submit_init_cmd(TaskDescriptor::new("noop", Value::Null), true),
        Err(DistError::AlreadyInitialized)
    );

    let at_o = || {
        vec![TaskDescriptor::new(
            "evalfn",
            evalfn_payload("rosenbrock_shifted", &spec.o, None),
        )]
    };
    assert_eq!(c.submit_work(at_o()).unwrap(), vec![json!(390.0)]);

    // A later worker gets the stored init command replayed.
    let b = Worker::spawn(&waddr(&s), 1, TaskRegistry::standard()).unwrap();
    let t = Instant::now();
    while s.initialized_workers() < 2 && t.elapsed() < WAIT {
        std::thread::sleep(Duration::from_millis(5));
    }
    a.kill();
    assert_eq!(c.submit_work(at_o()).unwrap(), vec![json!(390.0)]);
    assert!(b.cmds_executed() >= 1);
}

#[test]
fn failed_init_removes_the_worker() {
    let s = Server::start(ServerConfig::local().inited(true).with_timeout(Duration::from_millis(300))).unwrap();
    let _w = Worker::spawn(&waddr(&s), 1, TaskRegistry::standard()).unwrap();
    assert!(s.wait_for_workers(1, WAIT));
    let mut c = Client::connect(&caddr(&s)).unwrap();
    let r = c.submit_init_cmd(TaskDescriptor::new("fail", json!("bad init")), true);
    assert!(matches!(r, Err(DistError::InitFailed(_))), "{r:?}");
    assert_eq!(s.worker_count(), 0);
}

#[test]
fn run_on_all_threads_counts_every_pool_thread() {
    let counter = Arc::new(AtomicUsize::new(0));
    let s = server(5_000);
    let _ws: Vec<Worker> = (0..2)
        .map(|_| Worker::spawn(&waddr(&s), 4, test_registry(Arc::clone(&counter))).unwrap())
        .collect();
    assert!(s.wait_for_workers(2, WAIT));
    let mut c = Client::connect(&caddr(&s)).unwrap();
    c.submit_cmd(TaskDescriptor::new("count", Value::Null), true).unwrap();
    assert_eq!(counter.load(Ordering::SeqCst), 8);
    c.submit_cmd(TaskDescriptor::new("count", Value::Null), false).unwrap();
    assert_eq!(counter.load(Ordering::SeqCst), 10);
}

#[test]
fn thread_tables_updated_by_command_are_seen_by_tasks() {
    let s = server(5_000);
    let _ws: Vec<Worker> = (0..2)
        .map(|_| Worker::spawn(&waddr(&s), 3, TaskRegistry::standard()).unwrap())
        .collect();
    assert!(s.wait_for_workers(2, WAIT));
    let mut c = Client::connect(&caddr(&s)).unwrap();
    let p = ParamMap::new().with("table", vec![1.0, 2.0]);
    c.submit_cmd(TaskDescriptor::new("threadparams", serde_json::to_value(&p).unwrap()), true)
        .unwrap();
    let r = c
        .submit_work((0..12).map(|_| TaskDescriptor::new("getparam", json!("table"))).collect())
        .unwrap();
    assert!(r.iter().all(|v| v == &json!({"t": "vec", "v": [1.0, 2.0]})), "{r:?}");
}

#[test]
fn command_without_workers_is_replayed_to_the_next_one() {
    let counter = Arc::new(AtomicUsize::new(0));
    let s = server(5_000);
    let mut c = Client::connect(&caddr(&s)).unwrap();
    c.submit_cmd(TaskDescriptor::new("count", Value::Null), false).unwrap();
    assert_eq!(counter.load(Ordering::SeqCst), 0);
    let _w = Worker::spawn(&waddr(&s), 2, test_registry(Arc::clone(&counter))).unwrap();
    assert!(s.wait_for_workers(1, WAIT));
    assert_eq!(counter.load(Ordering::SeqCst), 1);
}

#[test]
fn worker_added_mid_stream_gets_later_chunks() {
    let s = server(5_000);
    let _a = Worker::spawn(&waddr(&s), 1, TaskRegistry::standard()).unwrap();
    assert!(s.wait_for_workers(1, WAIT));
    let mut c = Client::connect(&caddr(&s)).unwrap();
    let xs = points(4);
    assert_eq!(c.submit_work(eval_tasks(&xs)).unwrap(), local(&xs));
    let b = Worker::spawn(&waddr(&s), 1, TaskRegistry::standard()).unwrap();
    assert!(s.wait_for_workers(2, WAIT));
    assert_eq!(c.submit_work(eval_tasks(&xs)).unwrap(), local(&xs));
    assert_eq!(b.chunks_executed(), 1);
}
