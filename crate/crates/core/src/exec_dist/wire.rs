//! Framing and message kinds.
//!
//! A frame is a 4-byte big-endian payload length followed by a UTF-8 JSON
//! object `{"v": 1, "kind": ..., ...}`.

use std::io::{Read, Write};
use std::net::{Shutdown, TcpStream};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::DistError;

pub const PROTOCOL_VERSION: u64 = 1;
pub const MAX_FRAME_LEN: u32 = 256 << 20;

/// A task to run on a worker: a registered kind name and its payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDescriptor {
    pub kind: String,
    #[serde(default)]
    pub payload: Value,
}

impl TaskDescriptor {
    pub fn new(kind: impl Into<String>, payload: Value) -> Self {
        Self {
            kind: kind.into(),
            payload,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Message {
    /// `server_id` is set when the client is itself a server.
    HelloClient {
        #[serde(default)]
        server_id: Option<String>,
    },
    HelloWorker {
        threads: usize,
    },
    /// Handshake reply carrying the accepting server's id.
    Welcome {
        server_id: String,
    },
    AvailabilityQuery,
    AvailabilityReply {
        free_threads: usize,
    },
    SubmitBatch {
        request_id: u64,
        tasks: Vec<TaskDescriptor>,
    },
    ExecuteChunk {
        chunk_id: u64,
        tasks: Vec<TaskDescriptor>,
    },
    ChunkResult {
        chunk_id: u64,
        results: Vec<Value>,
    },
    OkReply,
    FailedReply {
        reason: String,
    },
    InitCmd {
        cmd: TaskDescriptor,
        ok_reply_requested: bool,
    },
    BroadcastCmd {
        cmd: TaskDescriptor,
    },
    RunOnAllThreadsCmd {
        cmd: TaskDescriptor,
    },
    ForwardBatch {
        origin_server_id: String,
        request_id: u64,
        tasks: Vec<TaskDescriptor>,
        hops: u32,
    },
    BatchResult {
        request_id: u64,
        results: Vec<Value>,
    },
}

impl Message {
    pub fn failed(reason: impl Into<String>) -> Self {
        Self::FailedReply {
            reason: reason.into(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::HelloClient { .. } => "HelloClient",
            Self::HelloWorker { .. } => "HelloWorker",
            Self::Welcome { .. } => "Welcome",
            Self::AvailabilityQuery => "AvailabilityQuery",
            Self::AvailabilityReply { .. } => "AvailabilityReply",
            Self::SubmitBatch { .. } => "SubmitBatch",
            Self::ExecuteChunk { .. } => "ExecuteChunk",
            Self::ChunkResult { .. } => "ChunkResult",
            Self::OkReply => "OkReply",
            Self::FailedReply { .. } => "FailedReply",
            Self::InitCmd { .. } => "InitCmd",
            Self::BroadcastCmd { .. } => "BroadcastCmd",
            Self::RunOnAllThreadsCmd { .. } => "RunOnAllThreadsCmd",
            Self::ForwardBatch { .. } => "ForwardBatch",
            Self::BatchResult { .. } => "BatchResult",
        }
    }
}

pub fn encode(msg: &Message) -> Result<Vec<u8>, DistError> {
    let mut v = serde_json::to_value(msg).map_err(|e| DistError::Protocol(e.to_string()))?;
    v.as_object_mut()
        .expect("messages serialize to objects")
        .insert("v".into(), PROTOCOL_VERSION.into());
    serde_json::to_vec(&v).map_err(|e| DistError::Protocol(e.to_string()))
}

pub fn decode(bytes: &[u8]) -> Result<Message, DistError> {
    let v: Value = serde_json::from_slice(bytes).map_err(|e| DistError::Protocol(format!("bad frame: {e}")))?;
    match v.get("v").and_then(Value::as_u64) {
        Some(PROTOCOL_VERSION) => {}
        Some(other) => return Err(DistError::Protocol(format!("unsupported protocol version {other}"))),
        None => return Err(DistError::Protocol("frame has no version".into())),
    }
    serde_json::from_value(v).map_err(|e| DistError::Protocol(format!("bad message: {e}")))
}

pub fn write_frame(w: &mut impl Write, msg: &Message) -> Result<(), DistError> {
    let body = encode(msg)?;
    let len = u32::try_from(body.len())
        .ok()
        .filter(|l| *l <= MAX_FRAME_LEN)
        .ok_or_else(|| DistError::Protocol(format!("frame of {} bytes is too large", body.len())))?;
    let mut buf = Vec::with_capacity(4 + body.len());
    buf.extend_from_slice(&len.to_be_bytes());
    buf.extend_from_slice(&body);
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_frame(r: &mut impl Read) -> Result<Message, DistError> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_be_bytes(len);
    if len > MAX_FRAME_LEN {
        return Err(DistError::Protocol(format!("frame length {len} exceeds limit")));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    decode(&body)
}

/// A framed TCP connection used in strict request/reply fashion.
#[derive(Debug)]
pub struct Conn {
    stream: TcpStream,
}

impl Conn {
    pub fn new(stream: TcpStream) -> Self {
        let _ = stream.set_nodelay(true);
        Self { stream }
    }

    pub fn connect(addr: &str) -> Result<Self, DistError> {
        Ok(Self::new(TcpStream::connect(addr)?))
    }

    pub fn send(&mut self, msg: &Message) -> Result<(), DistError> {
        write_frame(&mut self.stream, msg)
    }

    pub fn recv(&mut self) -> Result<Message, DistError> {
        read_frame(&mut self.stream)
    }

    pub fn call(&mut self, msg: &Message) -> Result<Message, DistError> {
        self.send(msg)?;
        self.recv()
    }

    pub fn try_clone_stream(&self) -> Result<TcpStream, DistError> {
        Ok(self.stream.try_clone()?)
    }

    pub fn close(&self) {
        let _ = self.stream.shutdown(Shutdown::Both);
    }
}
