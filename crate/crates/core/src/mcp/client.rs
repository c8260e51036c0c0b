//! Spawns the tool server as a child process and talks JSON-RPC over its
//! stdio. A reader task drains stdout and resolves pending calls by id, so
//! concurrent callers may share one connection.

use std::collections::HashMap;
use std::ffi::OsStr;
use std::process::Stdio;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use serde_json::{json, Value};
use thiserror::Error;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::process::{Child, ChildStdin, Command};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;
use tracing::{debug, warn};

use super::envelope::ToolEnvelope;
use super::protocol::{RpcError, RpcRequest, RpcResponse, PROTOCOL_VERSION};
use super::ToolTransport;

pub const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(5);
pub const CALL_TIMEOUT: Duration = Duration::from_secs(30);
pub const SHUTDOWN_GRACE: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, Error, PartialEq)]
pub enum McpError {
    #[error("failed to spawn tool server: {0}")]
    SpawnFailed(String),
    #[error("tool server did not answer initialize in time")]
    HandshakeTimeout,
    #[error("tool call timed out")]
    CallTimeout,
    #[error("connection closed")]
    ConnectionClosed,
    #[error("connection not initialized")]
    NotInitialized,
    #[error("rpc error {}: {}", .0.code, .0.message)]
    Rpc(RpcError),
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl McpError {
    pub fn code(&self) -> &'static str {
        match self {
            McpError::SpawnFailed(_) => "SPAWN_FAILED",
            McpError::HandshakeTimeout => "HANDSHAKE_TIMEOUT",
            McpError::CallTimeout => "CALL_TIMEOUT",
            McpError::ConnectionClosed => "CONNECTION_CLOSED",
            McpError::NotInitialized => "NOT_INITIALIZED",
            McpError::Rpc(_) => "RPC_ERROR",
            McpError::Malformed(_) => "MALFORMED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnState {
    Spawned,
    Initialized,
    Closed,
}

#[derive(Debug, Clone, Copy)]
pub struct ClientOptions {
    pub handshake_timeout: Duration,
    pub call_timeout: Duration,
    pub shutdown_grace: Duration,
}

impl Default for ClientOptions {
    fn default() -> Self {
        ClientOptions {
            handshake_timeout: HANDSHAKE_TIMEOUT,
            call_timeout: CALL_TIMEOUT,
            shutdown_grace: SHUTDOWN_GRACE,
        }
    }
}

type Pending = Arc<Mutex<HashMap<u64, oneshot::Sender<Result<RpcResponse, McpError>>>>>;

struct Inner {
    stdin: tokio::sync::Mutex<Option<ChildStdin>>,
    child: tokio::sync::Mutex<Option<Child>>,
    pending: Pending,
    state: Arc<Mutex<ConnState>>,
    next_id: AtomicU64,
    capabilities: Mutex<Option<Value>>,
    reader: Mutex<Option<JoinHandle<()>>>,
    options: ClientOptions,
}

fn fail_all(pending: &Pending) {
    let drained: Vec<_> = pending
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .drain()
        .collect();
    for (_, tx) in drained {
        let _ = tx.send(Err(McpError::ConnectionClosed));
    }
}

/// Cloneable handle to one tool-server connection.
#[derive(Clone)]
pub struct McpClient {
    inner: Arc<Inner>,
}

impl McpClient {
    /// Spawns `program args...` with `env` added and runs the initialize handshake.
    pub async fn spawn_and_initialize<I, S, E, K, V>(
        program: &str,
        args: I,
        env: E,
        options: ClientOptions,
    ) -> Result<McpClient, McpError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<OsStr>,
        E: IntoIterator<Item = (K, V)>,
        K: AsRef<OsStr>,
        V: AsRef<OsStr>,
    {
        let mut child = Command::new(program)
            .args(args)
            .envs(env)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .kill_on_drop(true)
            .spawn()
            .map_err(|e| McpError::SpawnFailed(format!("{program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");

        let pending: Pending = Arc::default();
        let state = Arc::new(Mutex::new(ConnState::Spawned));
        let reader = {
            let pending = Arc::clone(&pending);
            let state = Arc::clone(&state);
            tokio::spawn(async move {
                let mut lines = BufReader::new(stdout).lines();
                while let Ok(Some(line)) = lines.next_line().await {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let resp: RpcResponse = match serde_json::from_str(&line) {
                        Ok(r) => r,
                        Err(e) => {
                            warn!("unparseable line from tool server: {e}");
                            continue;
                        }
                    };
                    let Some(id) = resp.id.as_u64() else {
                        warn!("response without numeric id");
                        continue;
                    };
                    let tx = pending
                        .lock()
                        .unwrap_or_else(|e| e.into_inner())
                        .remove(&id);
                    match tx {
                        Some(tx) => {
                            let _ = tx.send(Ok(resp));
                        }
                        None => debug!(id, "response for unknown or abandoned request"),
                    }
                }
                *state.lock().unwrap_or_else(|e| e.into_inner()) = ConnState::Closed;
                fail_all(&pending);
            })
        };

        let client = McpClient {
            inner: Arc::new(Inner {
                stdin: tokio::sync::Mutex::new(Some(stdin)),
                child: tokio::sync::Mutex::new(Some(child)),
                pending,
                state,
                next_id: AtomicU64::new(1),
                capabilities: Mutex::new(None),
                reader: Mutex::new(Some(reader)),
                options,
            }),
        };

        let init = client
            .request(
                "initialize",
                json!({
                    "protocolVersion": PROTOCOL_VERSION,
                    "capabilities": {},
                    "clientInfo": { "name": "forumbot-agent", "version": env!("CARGO_PKG_VERSION") },
                }),
                options.handshake_timeout,
            )
            .await;
        let result = match init {
            Ok(r) => r,
            Err(e) => {
                client.shutdown().await;
                return Err(match e {
                    McpError::CallTimeout => McpError::HandshakeTimeout,
                    other => other,
                });
            }
        };
        *client
            .inner
            .capabilities
            .lock()
            .unwrap_or_else(|e| e.into_inner()) = result.get("capabilities").cloned();
        client.notify("notifications/initialized").await?;
        client.set_state(ConnState::Initialized);
        Ok(client)
    }

    pub fn state(&self) -> ConnState {
        *self.inner.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn set_state(&self, s: ConnState) {
        let mut guard = self.inner.state.lock().unwrap_or_else(|e| e.into_inner());
        if *guard != ConnState::Closed {
            *guard = s;
        }
    }

    pub fn capabilities(&self) -> Option<Value> {
        self.inner
            .capabilities
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }

    /// The id the next request will use.
    pub fn peek_next_id(&self) -> u64 {
        self.inner.next_id.load(Ordering::SeqCst)
    }

    pub fn pending_count(&self) -> usize {
        self.inner
            .pending
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .len()
    }

    async fn write_line(&self, line: String) -> Result<(), McpError> {
        let mut guard = self.inner.stdin.lock().await;
        let stdin = guard.as_mut().ok_or(McpError::ConnectionClosed)?;
        stdin
            .write_all(line.as_bytes())
            .await
            .map_err(|_| McpError::ConnectionClosed)?;
        stdin.flush().await.map_err(|_| McpError::ConnectionClosed)
    }

    async fn notify(&self, method: &str) -> Result<(), McpError> {
        let mut line =
            serde_json::to_string(&RpcRequest::notification(method)).expect("serializes");
        line.push('\n');
        self.write_line(line).await
    }

    async fn request(
        &self,
        method: &str,
        params: Value,
        timeout: Duration,
    ) -> Result<Value, McpError> {
        if self.state() == ConnState::Closed {
            return Err(McpError::ConnectionClosed);
        }
        let id = self.inner.next_id.fetch_add(1, Ordering::SeqCst);
        let (tx, rx) = oneshot::channel();
        self.inner
            .pending
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id, tx);
        let mut line =
            serde_json::to_string(&RpcRequest::call(id, method, params)).expect("serializes");
        line.push('\n');
        if let Err(e) = self.write_line(line).await {
            self.inner
                .pending
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .remove(&id);
            return Err(e);
        }
        let resp = match tokio::time::timeout(timeout, rx).await {
            Ok(Ok(r)) => r?,
            Ok(Err(_)) => return Err(McpError::ConnectionClosed),
            Err(_) => {
                self.inner
                    .pending
                    .lock()
                    .unwrap_or_else(|e| e.into_inner())
                    .remove(&id);
                return Err(McpError::CallTimeout);
            }
        };
        match (resp.result, resp.error) {
            (_, Some(err)) => Err(McpError::Rpc(err)),
            (Some(result), None) => Ok(result),
            (None, None) => Err(McpError::Malformed(
                "response has neither result nor error".into(),
            )),
        }
    }

    pub async fn list_tools(&self) -> Result<Vec<Value>, McpError> {
        if self.state() != ConnState::Initialized {
            return Err(self.not_ready());
        }
        let r = self
            .request("tools/list", json!({}), self.inner.options.call_timeout)
            .await?;
        r.get("tools")
            .and_then(Value::as_array)
            .cloned()
            .ok_or_else(|| McpError::Malformed("tools/list without tools".into()))
    }

    fn not_ready(&self) -> McpError {
        match self.state() {
            ConnState::Closed => McpError::ConnectionClosed,
            _ => McpError::NotInitialized,
        }
    }

    pub async fn call_tool(&self, name: &str, args: Value) -> Result<ToolEnvelope, McpError> {
        if self.state() != ConnState::Initialized {
            return Err(self.not_ready());
        }
        let r = self
            .request(
                "tools/call",
                json!({ "name": name, "arguments": args }),
                self.inner.options.call_timeout,
            )
            .await?;
        let envelope = r
            .get("structuredContent")
            .cloned()
            .ok_or_else(|| McpError::Malformed("tools/call without structuredContent".into()))?;
        serde_json::from_value(envelope).map_err(|e| McpError::Malformed(e.to_string()))
    }

    /// Closes stdin, waits for the child up to the grace period, then kills
    /// it. Pending calls resolve with `ConnectionClosed`. Idempotent.
    pub async fn shutdown(&self) {
        *self.inner.state.lock().unwrap_or_else(|e| e.into_inner()) = ConnState::Closed;
        self.inner.stdin.lock().await.take();
        fail_all(&self.inner.pending);
        let child = self.inner.child.lock().await.take();
        if let Some(mut child) = child {
            match tokio::time::timeout(self.inner.options.shutdown_grace, child.wait()).await {
                Ok(_) => {}
                Err(_) => {
                    let _ = child.kill().await;
                    let _ = child.wait().await;
                }
            }
        }
        let reader = self
            .inner
            .reader
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .take();
        if let Some(reader) = reader {
            reader.abort();
        }
    }

    /// OS pid of the child while it is owned by this connection.
    pub async fn child_pid(&self) -> Option<u32> {
        self.inner.child.lock().await.as_ref().and_then(Child::id)
    }
}

#[async_trait]
impl ToolTransport for McpClient {
    async fn call_tool(&self, name: &str, args: Value) -> Result<ToolEnvelope, McpError> {
        McpClient::call_tool(self, name, args).await
    }

    async fn close(&self) {
        self.shutdown().await;
    }
}
