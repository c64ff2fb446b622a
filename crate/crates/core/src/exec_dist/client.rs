use serde_json::Value;

use super::wire::{Conn, Message, TaskDescriptor};
use super::DistError;

/// Blocking client of a [`Server`](super::Server). One request at a time
/// per connection.
#[derive(Debug)]
pub struct Client {
    conn: Conn,
    server_id: String,
    next_request: u64,
    init_sent: bool,
}

impl Client {
    pub fn connect(addr: &str) -> Result<Self, DistError> {
        let mut conn = Conn::connect(addr)?;
        match conn.call(&Message::HelloClient { server_id: None })? {
            Message::Welcome { server_id } => Ok(Self {
                conn,
                server_id,
                next_request: 0,
                init_sent: false,
            }),
            other => Err(unexpected(&other)),
        }
    }

    pub fn server_id(&self) -> &str {
        &self.server_id
    }

    /// Runs `tasks` on the network; `results[i]` belongs to `tasks[i]`.
    pub fn submit_work(&mut self, tasks: Vec<TaskDescriptor>) -> Result<Vec<Value>, DistError> {
        if tasks.is_empty() {
            return Ok(Vec::new());
        }
        let n = tasks.len();
        let request_id = self.next_request;
        self.next_request += 1;
        match self.conn.call(&Message::SubmitBatch { request_id, tasks })? {
            Message::BatchResult { request_id: r, results } if r == request_id && results.len() == n => Ok(results),
            Message::FailedReply { reason } => Err(DistError::ServerFailedReply(reason)),
            other => Err(unexpected(&other)),
        }
    }

    /// Sends the init command; allowed once per client. With
    /// `ok_reply_requested` this blocks until a worker is initialized.
    pub fn submit_init_cmd(&mut self, cmd: TaskDescriptor, ok_reply_requested: bool) -> Result<(), DistError> {
        if self.init_sent {
            return Err(DistError::AlreadyInitialized);
        }
        self.init_sent = true;
        match self.conn.call(&Message::InitCmd {
            cmd,
            ok_reply_requested,
        })? {
            Message::OkReply => Ok(()),
            Message::FailedReply { reason } => Err(DistError::InitFailed(reason)),
            other => Err(unexpected(&other)),
        }
    }

    /// Delivers `cmd` to every current and future worker, on every pool
    /// thread when `on_all_threads`.
    pub fn submit_cmd(&mut self, cmd: TaskDescriptor, on_all_threads: bool) -> Result<(), DistError> {
        let msg = if on_all_threads {
            Message::RunOnAllThreadsCmd { cmd }
        } else {
            Message::BroadcastCmd { cmd }
        };
        match self.conn.call(&msg)? {
            Message::OkReply => Ok(()),
            Message::FailedReply { reason } => Err(DistError::CmdFailed(reason)),
            other => Err(unexpected(&other)),
        }
    }
}

fn unexpected(m: &Message) -> DistError {
    DistError::Protocol(format!("unexpected reply {}", m.kind_name()))
}
