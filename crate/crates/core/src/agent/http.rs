//! Agent HTTP endpoints: scan trigger and status for `http_service` mode,
//! status only for polling agents with `http_bind` set.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use tokio::sync::Mutex;
use tokio_util::sync::CancellationToken;

use super::runtime::{Agent, StatusHandle};

#[derive(Clone)]
struct AppState {
    agent: Arc<Mutex<Agent>>,
    status: StatusHandle,
}

async fn scan(State(s): State<AppState>) -> Response {
    let Ok(mut agent) = s.agent.try_lock() else {
        return (
            StatusCode::CONFLICT,
            Json(json!({ "error": "scan already in progress" })),
        )
            .into_response();
    };
    match agent.scan_once().await {
        Ok(r) => Json(json!({ "handled": r.handled, "replies": r.replies, "errors": r.errors }))
            .into_response(),
        Err(e) => (
            StatusCode::BAD_GATEWAY,
            Json(json!({ "error": e.to_string() })),
        )
            .into_response(),
    }
}

async fn status_view(State(s): State<AppState>) -> Response {
    Json(s.status.view()).into_response()
}

pub fn router(agent: Arc<Mutex<Agent>>, status: StatusHandle) -> Router {
    Router::new()
        .route("/agent/scan", post(scan))
        .route("/agent/status", get(status_view))
        .with_state(AppState { agent, status })
}

/// Read-only status for agents that poll on their own.
pub fn status_router(status: StatusHandle) -> Router {
    Router::new()
        .route(
            "/agent/status",
            get(|State(s): State<StatusHandle>| async move { Json(s.view()) }),
        )
        .with_state(status)
}

pub struct AgentHttpHandle {
    pub addr: SocketAddr,
    stop: CancellationToken,
    task: tokio::task::JoinHandle<()>,
}

impl AgentHttpHandle {
    pub async fn start(agent: Arc<Mutex<Agent>>, bind: &str) -> std::io::Result<AgentHttpHandle> {
        let status = agent.lock().await.status_handle();
        let listener = tokio::net::TcpListener::bind(bind).await?;
        let addr = listener.local_addr()?;
        let stop = CancellationToken::new();
        let s = stop.clone();
        let app = router(agent, status);
        let task = tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async move { s.cancelled().await })
                .await;
        });
        Ok(AgentHttpHandle { addr, stop, task })
    }

    pub async fn start_status(
        status: StatusHandle,
        bind: &str,
    ) -> std::io::Result<AgentHttpHandle> {
        let listener = tokio::net::TcpListener::bind(bind).await?;
        let addr = listener.local_addr()?;
        let stop = CancellationToken::new();
        let s = stop.clone();
        let task = tokio::spawn(async move {
            let _ = axum::serve(listener, status_router(status))
                .with_graceful_shutdown(async move { s.cancelled().await })
                .await;
        });
        Ok(AgentHttpHandle { addr, stop, task })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub async fn shutdown(self) {
        self.stop.cancel();
        let _ = self.task.await;
    }

    pub async fn wait(self, stop: CancellationToken) {
        stop.cancelled().await;
        self.shutdown().await;
    }
}
