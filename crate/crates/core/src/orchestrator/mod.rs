//! Whole-system entry points behind the `forumbot` subcommands.

pub mod config;
pub mod scenario;
pub mod seed;

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio_util::sync::CancellationToken;

pub use config::{ForumbotConfig, SeedConfig, ServerConfig};
pub use scenario::{Scenario, ScenarioReport};
pub use seed::{seed, SeedReport};

use crate::client::ForumClient;
use crate::forum::http::serve;
use crate::forum::store::StoreError;
use crate::forum::ForumService;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("bad bind address `{0}`")]
    BadAddress(String),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

pub fn open_forum(cfg: &ServerConfig) -> Result<Arc<ForumService>, StoreError> {
    Ok(Arc::new(match &cfg.data_path {
        Some(p) => ForumService::open(cfg.forum.clone(), p)?,
        None => ForumService::in_memory(cfg.forum.clone()),
    }))
}

/// Serves the forum until `stop` fires. Every accepted write is already
/// durable, so stopping needs no flush.
pub async fn serve_forum(
    cfg: &ServerConfig,
    stop: CancellationToken,
) -> Result<SocketAddr, ServeError> {
    let addr: SocketAddr = cfg
        .bind
        .parse()
        .map_err(|_| ServeError::BadAddress(cfg.bind.clone()))?;
    let forum = open_forum(cfg)?;
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind {
            addr: cfg.bind.clone(),
            source,
        })?;
    let local = listener.local_addr()?;
    tracing::info!(addr = %local, "forum listening");
    serve(forum, listener, None, async move { stop.cancelled().await }).await?;
    Ok(local)
}

#[derive(Debug, Clone, Serialize)]
pub struct ForumStatus {
    pub url: String,
    pub online: bool,
    pub boards: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AgentProbe {
    pub agent_id: String,
    pub url: Option<String>,
    pub online: bool,
    pub status: Option<Value>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemStatus {
    pub forum: ForumStatus,
    pub agents: Vec<AgentProbe>,
}

/// Probes the forum and every agent that exposes HTTP endpoints.
pub async fn status(cfg: &ForumbotConfig) -> SystemStatus {
    let url = cfg.server.base_url();
    let boards = ForumClient::new(&url).list_boards(1).await.ok();
    let http = reqwest::Client::builder()
        .timeout(Duration::from_secs(2))
        .build()
        .expect("http client");
    let mut agents = Vec::new();
    for a in &cfg.agents {
        let url = a.http_bind.as_ref().map(|b| format!("http://{b}"));
        let status = match &url {
            Some(u) => match http.get(format!("{u}/agent/status")).send().await {
                Ok(r) if r.status().is_success() => r.json::<Value>().await.ok(),
                _ => None,
            },
            None => None,
        };
        agents.push(AgentProbe {
            agent_id: a.agent_id.clone(),
            url,
            online: status.is_some(),
            status,
        });
    }
    SystemStatus {
        forum: ForumStatus {
            url,
            online: boards.is_some(),
            boards: boards.map(|b| b.total_items),
        },
        agents,
    }
}
