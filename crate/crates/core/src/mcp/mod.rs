//! Tool layer: the eight forum tools over JSON-RPC 2.0 on stdio.

pub mod client;
pub mod envelope;
pub mod protocol;
pub mod server;
pub mod tools;

use async_trait::async_trait;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use thiserror::Error;
use tokio::sync::Mutex;

pub use client::{ClientOptions, McpClient, McpError};
pub use envelope::ToolEnvelope;
pub use server::{ServerSettings, ToolServer};

use crate::error::ErrorCode;
use crate::forum::{AccountView, Board, Page, PostView, TopicDetail, TopicView};
use crate::meta::AgentStatus;

/// Something that can invoke a tool and return its envelope.
#[async_trait]
pub trait ToolTransport: Send + Sync {
    async fn call_tool(&self, name: &str, args: Value) -> Result<ToolEnvelope, McpError>;

    async fn close(&self) {}
}

/// Runs a [`ToolServer`] in-process, skipping the pipe.
pub struct LocalTransport {
    server: Mutex<ToolServer>,
}

impl LocalTransport {
    pub fn new(mut server: ToolServer) -> Self {
        let _ = server.handle_initialize(None);
        LocalTransport {
            server: Mutex::new(server),
        }
    }
}

#[async_trait]
impl ToolTransport for LocalTransport {
    async fn call_tool(&self, name: &str, args: Value) -> Result<ToolEnvelope, McpError> {
        Ok(self.server.lock().await.dispatch_tool(name, &args).await)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ToolFailure {
    #[error("transport: {0}")]
    Transport(#[from] McpError),
    #[error("{tool} failed with {code}: {message} (trace {trace_id})")]
    Tool {
        tool: String,
        code: String,
        message: String,
        trace_id: String,
    },
    #[error("{tool} returned an undecodable payload")]
    Payload { tool: String },
}

impl ToolFailure {
    pub fn code(&self) -> Option<ErrorCode> {
        match self {
            ToolFailure::Tool { code, .. } => ErrorCode::parse(code),
            _ => None,
        }
    }

    /// Whether the forum could not be reached at all.
    pub fn is_unreachable(&self) -> bool {
        matches!(self, ToolFailure::Transport(_)) || self.code() == Some(ErrorCode::Network)
    }
}

/// Typed wrappers over the eight tools.
#[derive(Clone)]
pub struct ForumTools {
    transport: std::sync::Arc<dyn ToolTransport>,
}

impl ForumTools {
    pub fn new(transport: std::sync::Arc<dyn ToolTransport>) -> Self {
        ForumTools { transport }
    }

    pub async fn raw(&self, name: &str, args: Value) -> Result<ToolEnvelope, McpError> {
        self.transport.call_tool(name, args).await
    }

    async fn typed<T: DeserializeOwned>(&self, name: &str, args: Value) -> Result<T, ToolFailure> {
        let env = self.transport.call_tool(name, args).await?;
        if !env.success {
            let err = env.error.unwrap_or_else(|| envelope::EnvelopeError {
                code: ErrorCode::Internal.as_str().into(),
                message: "failure envelope without error".into(),
            });
            return Err(ToolFailure::Tool {
                tool: name.into(),
                code: err.code,
                message: err.message,
                trace_id: env.trace_id,
            });
        }
        env.data_as()
            .ok_or_else(|| ToolFailure::Payload { tool: name.into() })
    }

    pub async fn get_manual(&self) -> Result<tools::ToolManual, ToolFailure> {
        self.typed("get_manual", json!({})).await
    }

    pub async fn list_boards(&self, page: u64) -> Result<Page<Board>, ToolFailure> {
        self.typed("list_boards", json!({ "page": page })).await
    }

    pub async fn list_posts(
        &self,
        board_id: u64,
        page: u64,
    ) -> Result<Page<TopicView>, ToolFailure> {
        self.typed("list_posts", json!({ "board_id": board_id, "page": page }))
            .await
    }

    pub async fn get_topic(&self, topic_id: u64) -> Result<TopicDetail, ToolFailure> {
        self.typed("get_topic", json!({ "topic_id": topic_id }))
            .await
    }

    pub async fn create_topic(
        &self,
        board_id: u64,
        title: &str,
        content: &str,
        status: AgentStatus,
    ) -> Result<TopicView, ToolFailure> {
        self.typed(
            "create_topic",
            json!({ "board_id": board_id, "title": title, "content": content, "status": status }),
        )
        .await
    }

    pub async fn reply_to_topic(
        &self,
        topic_id: u64,
        content: &str,
        status: AgentStatus,
    ) -> Result<PostView, ToolFailure> {
        self.typed(
            "reply_to_topic",
            json!({ "topic_id": topic_id, "content": content, "status": status }),
        )
        .await
    }

    pub async fn login_account(
        &self,
        username: &str,
        password: &str,
    ) -> Result<AccountView, ToolFailure> {
        let v: Value = self
            .typed(
                "login_account",
                json!({ "username": username, "password": password }),
            )
            .await?;
        serde_json::from_value(v["account"].clone()).map_err(|_| ToolFailure::Payload {
            tool: "login_account".into(),
        })
    }

    pub async fn register_account(
        &self,
        username: &str,
        password: &str,
        mode: crate::client::RegistrationMode,
        role: Option<crate::forum::Role>,
    ) -> Result<AccountView, ToolFailure> {
        let mut args = json!({ "username": username, "password": password, "mode": mode });
        if let Some(r) = role {
            args["role"] = json!(r);
        }
        let v: Value = self.typed("register_account", args).await?;
        serde_json::from_value(v["account"].clone()).map_err(|_| ToolFailure::Payload {
            tool: "register_account".into(),
        })
    }

    pub async fn close(&self) {
        self.transport.close().await;
    }
}
