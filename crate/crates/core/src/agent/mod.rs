//! Forum agent: poll for mentions, extract, check, execute, summarize,
//! reply.

pub mod config;
pub mod extract;
pub mod http;
pub mod llm;
pub mod processed;
pub mod runtime;

use std::sync::Arc;

use tokio::sync::Mutex;
use tokio_util::sync::CancellationToken;
use tracing::error;

pub use config::{AgentConfig, AgentMode, ConfigError, PlannerKind};
pub use extract::{
    extract_command, extract_fallback, mentions_me, summarize_result, ExtractionResult,
    ExtractionSource,
};
pub use llm::{LlmConfig, LlmError, LlmProvider, MockProvider, ProviderKind, ScriptedProvider};
pub use processed::ProcessedSet;
pub use runtime::{Agent, AgentEvent, AgentStatusView, ScanReport, SetupError, StatusHandle};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_UNREACHABLE: i32 = 3;

/// Runs an agent in its configured mode and returns a process exit code.
pub async fn run(config: AgentConfig, stop: CancellationToken) -> i32 {
    if let Err(e) = config.validate() {
        error!("{e}");
        return EXIT_CONFIG;
    }
    let mode = config.mode;
    let status_bind = config.http_bind.clone();
    let bind = status_bind
        .clone()
        .unwrap_or_else(|| "127.0.0.1:8090".into());
    let mut agent = match Agent::connect(config).await {
        Ok(a) => a,
        Err(e @ (SetupError::Config(_) | SetupError::Safety(_) | SetupError::Provider(_))) => {
            error!("{e}");
            return EXIT_CONFIG;
        }
        Err(e) => {
            error!("{e}");
            return EXIT_UNREACHABLE;
        }
    };
    let code = match mode {
        AgentMode::SingleRun => match agent.scan_once().await {
            Ok(r) => {
                println!("{}", serde_json::to_string(&r).expect("report serializes"));
                EXIT_OK
            }
            Err(e) if e.is_unreachable() => {
                error!("forum unreachable: {e}");
                EXIT_UNREACHABLE
            }
            Err(e) => {
                error!("scan failed: {e}");
                EXIT_FAILURE
            }
        },
        AgentMode::Polling => {
            let status = match status_bind {
                Some(b) => {
                    match http::AgentHttpHandle::start_status(agent.status_handle(), &b).await {
                        Ok(h) => Some(h),
                        Err(e) => {
                            error!("cannot bind {b}: {e}");
                            agent.close().await;
                            return EXIT_FAILURE;
                        }
                    }
                }
                None => None,
            };
            agent.run_loop(stop).await;
            if let Some(h) = status {
                h.shutdown().await;
            }
            EXIT_OK
        }
        AgentMode::HttpService => {
            let shared = Arc::new(Mutex::new(agent));
            match http::AgentHttpHandle::start(shared.clone(), &bind).await {
                Ok(handle) => {
                    tracing::info!(addr = %handle.addr, "agent http endpoints listening");
                    handle.wait(stop).await;
                    shared.lock().await.close().await;
                    return EXIT_OK;
                }
                Err(e) => {
                    error!("cannot bind {bind}: {e}");
                    shared.lock().await.close().await;
                    return EXIT_FAILURE;
                }
            }
        }
    };
    agent.close().await;
    code
}
