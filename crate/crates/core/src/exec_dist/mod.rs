//! Distributed batch execution over TCP.
//!
//! A [`Server`] accepts [`Client`]s on one port and [`Worker`]s on another.
//! A submitted batch is cut into one chunk per known worker; each chunk goes
//! to the first worker that reports a free thread. A chunk that fails is
//! retried once on the next available worker, and a worker that fails two
//! chunks in a row, or drops its connection, leaves the pool. When no local
//! worker is free a batch may be forwarded once to a peer server; forwarded
//! batches are never forwarded again.

mod client;
mod registry;
mod server;
mod wire;
mod worker;

use thiserror::Error;

pub use client::Client;
pub use registry::{evalfn_payload, value_as_fitness, with_thread_params, Handler, TaskContext, TaskRegistry};
pub use server::{Server, ServerConfig, ServerStats, DEFAULT_CLIENT_PORT, DEFAULT_TIMEOUT, DEFAULT_WORKER_PORT};
pub use wire::{decode, encode, read_frame, write_frame, Conn, Message, TaskDescriptor, PROTOCOL_VERSION};
pub use worker::Worker;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DistError {
    #[error("connection lost")]
    ConnectionLost,
    #[error("i/o error: {0}")]
    Io(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("server failed the request: {0}")]
    ServerFailedReply(String),
    #[error("init command already submitted on this client")]
    AlreadyInitialized,
    #[error("init command failed: {0}")]
    InitFailed(String),
    #[error("command failed: {0}")]
    CmdFailed(String),
}

impl From<std::io::Error> for DistError {
    fn from(e: std::io::Error) -> Self {
        use std::io::ErrorKind::*;
        match e.kind() {
            UnexpectedEof | ConnectionReset | ConnectionAborted | BrokenPipe | NotConnected => Self::ConnectionLost,
            _ => Self::Io(e.to_string()),
        }
    }
}

impl From<DistError> for crate::Error {
    fn from(e: DistError) -> Self {
        crate::Error::DistributedEvalFailed(e.to_string())
    }
}

/// Splits `n_tasks` into `min(n_tasks, n_workers)` chunks whose sizes differ
/// by at most one, larger chunks first.
pub fn chunk_tasks(n_tasks: usize, n_workers: usize) -> Vec<usize> {
    let k = n_tasks.min(n_workers.max(1));
    if k == 0 {
        return Vec::new();
    }
    let (q, r) = (n_tasks / k, n_tasks % k);
    (0..k).map(|i| q + usize::from(i < r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn chunk_examples() {
        assert_eq!(chunk_tasks(6, 3), vec![2, 2, 2]);
        assert_eq!(chunk_tasks(10, 3), vec![4, 3, 3]);
        assert_eq!(chunk_tasks(2, 3), vec![1, 1]);
        assert_eq!(chunk_tasks(1, 1), vec![1]);
    }

    proptest! {
        #[test]
        fn chunk_sizes_balanced(n in 1usize..500, w in 1usize..40) {
            let c = chunk_tasks(n, w);
            prop_assert_eq!(c.iter().sum::<usize>(), n);
            prop_assert_eq!(c.len(), n.min(w));
            prop_assert!(c.iter().all(|&s| s >= 1));
            prop_assert!(c.windows(2).all(|p| p[0] >= p[1] && p[0] - p[1] <= 1));
        }
    }
}
