use std::any::Any;
use std::cell::Cell;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::JoinHandle;

use crossbeam_channel::{select, unbounded, Receiver, Sender};
use thiserror::Error;

/// Structured failure of one task; occupies that task's result slot.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("task failed: {reason}")]
pub struct FailedResult {
    pub reason: String,
}

impl FailedResult {
    pub fn new(reason: impl Into<String>) -> Self {
        Self {
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("executor has been shut down")]
    ExecutorShutDown,
    #[error("command failed on {} pool thread(s): {failures:?}", failures.len())]
    CommandFailed { failures: Vec<(usize, String)> },
}

/// A unit of work with a result.
pub trait Task: Send + 'static {
    type Output: Send + 'static;
    fn run(self) -> Result<Self::Output, FailedResult>;
}

/// Closure adapter for [`Task`].
pub struct FnTask<F>(pub F);

impl<F, T> Task for FnTask<F>
where
    F: FnOnce() -> Result<T, FailedResult> + Send + 'static,
    T: Send + 'static,
{
    type Output = T;

    fn run(self) -> Result<T, FailedResult> {
        (self.0)()
    }
}

type Job = Box<dyn FnOnce() + Send>;

/// Command run once on every pool thread.
pub type ThreadCommand = Arc<dyn Fn() -> Result<(), FailedResult> + Send + Sync>;

thread_local! {
    static WORKER_INDEX: Cell<Option<usize>> = const { Cell::new(None) };
}

/// Index of the pool thread running the caller, if any.
pub fn current_worker() -> Option<usize> {
    WORKER_INDEX.with(Cell::get)
}

struct Senders {
    shared: Sender<Job>,
    private: Vec<Sender<Job>>,
}

/// Fixed-size thread pool with blocking batch submission.
///
/// Threads are spawned eagerly and live until [`shutdown`](Self::shutdown)
/// (or drop). Several callers may block in [`execute_batch`](Self::execute_batch)
/// at once; their tasks interleave on the pool.
pub struct BatchExecutor {
    size: usize,
    senders: RwLock<Option<Senders>>,
    handles: Mutex<Vec<JoinHandle<()>>>,
}

impl BatchExecutor {
    pub fn new(size: usize) -> Self {
        assert!(size > 0, "pool size must be positive");
        let (shared_tx, shared_rx) = unbounded::<Job>();
        let mut private = Vec::with_capacity(size);
        let mut handles = Vec::with_capacity(size);
        for index in 0..size {
            let (tx, rx) = unbounded::<Job>();
            private.push(tx);
            let shared_rx = shared_rx.clone();
            let h = std::thread::Builder::new()
                .name(format!("swarmgrid-pool-{index}"))
                .spawn(move || worker_loop(index, rx, shared_rx))
                .expect("failed to spawn pool thread");
            handles.push(h);
        }
        Self {
            size,
            senders: RwLock::new(Some(Senders {
                shared: shared_tx,
                private,
            })),
            handles: Mutex::new(handles),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_running(&self) -> bool {
        self.senders.read().unwrap().is_some()
    }

    /// Runs every task and returns results in task order. Blocks until the
    /// whole batch is done. A failing or panicking task yields a
    /// [`FailedResult`] in its slot; the other slots are unaffected.
    pub fn execute_batch<T: Task>(
        &self,
        tasks: Vec<T>,
    ) -> Result<Vec<Result<T::Output, FailedResult>>, ExecError> {
        let n = tasks.len();
        let (tx, rx) = crossbeam_channel::bounded(n);
        {
            let guard = self.senders.read().unwrap();
            let senders = guard.as_ref().ok_or(ExecError::ExecutorShutDown)?;
            for (i, task) in tasks.into_iter().enumerate() {
                let tx = tx.clone();
                let job: Job = Box::new(move || {
                    let r = catch_unwind(AssertUnwindSafe(|| task.run()))
                        .unwrap_or_else(|p| Err(FailedResult::new(panic_message(p))));
                    let _ = tx.send((i, r));
                });
                senders
                    .shared
                    .send(job)
                    .map_err(|_| ExecError::ExecutorShutDown)?;
            }
        }
        drop(tx);
        let mut slots: Vec<Option<Result<T::Output, FailedResult>>> = (0..n).map(|_| None).collect();
        for (i, r) in rx.iter() {
            slots[i] = Some(r);
        }
        Ok(slots
            .into_iter()
            .map(|s| s.unwrap_or_else(|| Err(FailedResult::new("task lost"))))
            .collect())
    }

    /// Runs `f(i)` for `i in 0..n` on the pool.
    pub fn scatter<R, F>(&self, n: usize, f: F) -> Result<Vec<Result<R, FailedResult>>, ExecError>
    where
        R: Send + 'static,
        F: Fn(usize) -> Result<R, FailedResult> + Send + Sync + 'static,
    {
        let f = Arc::new(f);
        let tasks = (0..n)
            .map(|i| {
                let f = Arc::clone(&f);
                FnTask(move || f(i))
            })
            .collect();
        self.execute_batch(tasks)
    }

    /// Runs `cmd` exactly once on each pool thread and waits for all of
    /// them.
    pub fn execute_on_all_threads(&self, cmd: ThreadCommand) -> Result<(), ExecError> {
        let (tx, rx) = crossbeam_channel::bounded(self.size);
        {
            let guard = self.senders.read().unwrap();
            let senders = guard.as_ref().ok_or(ExecError::ExecutorShutDown)?;
            for (index, s) in senders.private.iter().enumerate() {
                let tx = tx.clone();
                let cmd = Arc::clone(&cmd);
                let job: Job = Box::new(move || {
                    let r = catch_unwind(AssertUnwindSafe(|| cmd()))
                        .unwrap_or_else(|p| Err(FailedResult::new(panic_message(p))));
                    let _ = tx.send((index, r));
                });
                s.send(job).map_err(|_| ExecError::ExecutorShutDown)?;
            }
        }
        drop(tx);
        let mut failures: Vec<(usize, String)> = rx
            .iter()
            .filter_map(|(i, r)| r.err().map(|e| (i, e.reason)))
            .collect();
        if failures.is_empty() {
            Ok(())
        } else {
            failures.sort();
            Err(ExecError::CommandFailed { failures })
        }
    }

    /// Stops accepting work, lets queued tasks finish and joins the threads.
    pub fn shutdown(&self) {
        self.senders.write().unwrap().take();
        let handles = std::mem::take(&mut *self.handles.lock().unwrap());
        for h in handles {
            let _ = h.join();
        }
    }
}

impl Drop for BatchExecutor {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn worker_loop(index: usize, private: Receiver<Job>, shared: Receiver<Job>) {
    WORKER_INDEX.with(|w| w.set(Some(index)));
    let mut private_open = true;
    let mut shared_open = true;
    while private_open || shared_open {
        let job = match (private_open, shared_open) {
            (true, true) => select! {
                recv(private) -> j => j.map_err(|_| private_open = false).ok(),
                recv(shared) -> j => j.map_err(|_| shared_open = false).ok(),
            },
            (true, false) => private.recv().map_err(|_| private_open = false).ok(),
            (false, true) => shared.recv().map_err(|_| shared_open = false).ok(),
            (false, false) => None,
        };
        if let Some(job) = job {
            job();
        }
    }
}

fn panic_message(p: Box<dyn Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        format!("panic: {s}")
    } else if let Some(s) = p.downcast_ref::<String>() {
        format!("panic: {s}")
    } else {
        "panic".to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::time::Duration;

    #[test]
    fn results_keep_task_order() {
        let ex = BatchExecutor::new(2);
        let tasks: Vec<_> = [1, 2, 3].into_iter().map(|v| FnTask(move || Ok(v))).collect();
        let r: Vec<i32> = ex
            .execute_batch(tasks)
            .unwrap()
            .into_iter()
            .map(Result::unwrap)
            .collect();
        assert_eq!(r, vec![1, 2, 3]);
    }

    #[test]
    fn failure_is_isolated_to_its_slot() {
        let ex = BatchExecutor::new(3);
        let r = ex
            .scatter(5, |i| match i {
                1 => Err(FailedResult::new("boom")),
                3 => panic!("kaboom"),
                _ => Ok(i * 10),
            })
            .unwrap();
        assert_eq!(r[0], Ok(0));
        assert_eq!(r[1], Err(FailedResult::new("boom")));
        assert_eq!(r[2], Ok(20));
        assert!(r[3].as_ref().unwrap_err().reason.contains("kaboom"));
        assert_eq!(r[4], Ok(40));
    }

    #[test]
    fn every_thread_gets_work() {
        let ex = BatchExecutor::new(8);
        let counters: Arc<Vec<AtomicUsize>> = Arc::new((0..8).map(|_| AtomicUsize::new(0)).collect());
        let c = Arc::clone(&counters);
        ex.scatter(1000, move |_| {
            c[current_worker().unwrap()].fetch_add(1, Ordering::SeqCst);
            std::thread::sleep(Duration::from_micros(200));
            Ok(())
        })
        .unwrap();
        let per: Vec<usize> = counters.iter().map(|c| c.load(Ordering::SeqCst)).collect();
        assert_eq!(per.iter().sum::<usize>(), 1000);
        assert!(per.iter().all(|&n| n >= 1), "{per:?}");
    }

    #[test]
    fn run_on_all_threads_hits_each_thread_once() {
        let ex = BatchExecutor::new(4);
        let seen = Arc::new(Mutex::new(Vec::new()));
        let s = Arc::clone(&seen);
        ex.execute_on_all_threads(Arc::new(move || {
            s.lock().unwrap().push((std::thread::current().id(), current_worker()));
            Ok(())
        }))
        .unwrap();
        let seen = seen.lock().unwrap();
        assert_eq!(seen.len(), 4);
        let ids: HashSet<_> = seen.iter().map(|(id, _)| *id).collect();
        assert_eq!(ids.len(), 4);
        let idx: HashSet<_> = seen.iter().map(|(_, w)| w.unwrap()).collect();
        assert_eq!(idx, (0..4).collect());
    }

    #[test]
    fn run_on_all_threads_single_thread_pool() {
        let ex = BatchExecutor::new(1);
        let n = Arc::new(AtomicUsize::new(0));
        let c = Arc::clone(&n);
        ex.execute_on_all_threads(Arc::new(move || {
            c.fetch_add(1, Ordering::SeqCst);
            Ok(())
        }))
        .unwrap();
        assert_eq!(n.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn run_on_all_threads_reports_failures() {
        let ex = BatchExecutor::new(3);
        let e = ex
            .execute_on_all_threads(Arc::new(|| {
                if current_worker() == Some(1) {
                    Err(FailedResult::new("nope"))
                } else {
                    Ok(())
                }
            }))
            .unwrap_err();
        assert_eq!(
            e,
            ExecError::CommandFailed {
                failures: vec![(1, "nope".into())]
            }
        );
    }

    #[test]
    fn shut_down_executor_rejects_work() {
        let ex = BatchExecutor::new(2);
        ex.shutdown();
        assert!(!ex.is_running());
        assert_eq!(
            ex.execute_batch(vec![FnTask(|| Ok(1))]).unwrap_err(),
            ExecError::ExecutorShutDown
        );
        assert_eq!(
            ex.execute_on_all_threads(Arc::new(|| Ok(()))).unwrap_err(),
            ExecError::ExecutorShutDown
        );
    }

    #[test]
    fn concurrent_submitters_each_get_their_results() {
        let ex = Arc::new(BatchExecutor::new(3));
        std::thread::scope(|s| {
            for k in 0..4usize {
                let ex = Arc::clone(&ex);
                s.spawn(move || {
                    let r = ex.scatter(50, move |i| Ok(k * 1000 + i)).unwrap();
                    for (i, v) in r.into_iter().enumerate() {
                        assert_eq!(v.unwrap(), k * 1000 + i);
                    }
                });
            }
        });
    }
}
